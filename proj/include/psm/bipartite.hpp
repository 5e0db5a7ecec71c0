#pragma once

#include <cstdint>
#include <vector>

#include "psm/cascade_index.hpp"
#include "psm/csv.hpp"
#include "psm/types.hpp"

namespace psm {

// User-message bipartite graph. An edge (u,m) exists iff a tuple survived
// dedup; the degree of a message equals its cascade size.
struct BipartiteGraph {
    std::vector<std::vector<MessageId>> user_adj;  // ascending message ids
    std::vector<std::vector<UserId>> msg_adj;      // ascending user ids

    std::size_t user_count() const { return user_adj.size(); }
    std::size_t message_count() const { return msg_adj.size(); }
    std::size_t node_count() const { return user_adj.size() + msg_adj.size(); }
};

BipartiteGraph build_bipartite_graph(const ActionLog& log);

struct PageRankParams {
    double damping = 0.85;
    double tol = 1e-8;
    int max_iter = 100;
};

struct PageRankResult {
    std::vector<double> user_scores;
    std::vector<double> message_scores;
    int iterations = 0;
    bool converged = false;
};

// Fixed-point PageRank treating every edge as undirected (mass flows both
// ways, L(v') = degree). Scores sum to 1; dangling mass, if any, is spread
// uniformly. Accumulation is in ascending node order so that serial,
// parallel and dense-oracle runs agree bitwise.
PageRankResult pagerank(const BipartiteGraph& graph, const PageRankParams& params = {});

// Eq-style earliness measures for an existing edge (u,m).
double normalized_rank(const CascadeIndex& index, UserId u, MessageId m);
double time_decay(const CascadeIndex& index, UserId u, MessageId m, double gamma);

// Default decay rate: reciprocal of the median cascade duration (seconds);
// 0 when the median duration is 0.
double default_gamma(const CascadeIndex& index);

struct BipartiteFeatures {
    Table users;     // one row per key user
    Table messages;  // one row per message (size, viral, pagerank, Vr)
    double gamma = 0.0;
};

// All Table-II style per-user statistics. Jaccard/intersection statistics
// range over co-participants only (users sharing at least one message);
// empty families are 0 with their defined flag cleared.
BipartiteFeatures bipartite_features(const ActionLog& log, const CascadeIndex& index,
                                     const BipartiteGraph& graph, const PageRankResult& pr,
                                     double gamma);

}  // namespace psm
