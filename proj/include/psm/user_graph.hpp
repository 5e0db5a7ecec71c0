#pragma once

#include <cstdint>
#include <optional>
#include <unordered_set>
#include <vector>

#include "psm/cascade_index.hpp"
#include "psm/csv.hpp"
#include "psm/types.hpp"

namespace psm {

// Directed weighted key-user graph. Nodes are exactly the key users; i and j
// are linked when both are key users of at least one message. Direction:
// i->j exists iff the count of "i before j, both key" is >= the count of
// "j before i"; equal counts produce both edges.
//
// Every adjacency entry is stored from the owning node's perspective:
// `co` is CO_{i,j} (ordered numerator of i-before-j over the min key-message
// count) and `delta` is delta_{i,j}, for both the out and the in lists.
class UserGraph {
public:
    struct Neighbor {
        std::uint32_t node;  // neighbor node index
        double co;           // CO_{owner,neighbor}
        std::int64_t delta;  // delta_{owner,neighbor}
    };

    std::size_t node_count() const { return nodes_.size(); }
    UserId user_of(std::uint32_t node) const { return nodes_.at(node); }
    std::optional<std::uint32_t> node_of(UserId u) const;
    const std::vector<UserId>& nodes() const { return nodes_; }

    const std::vector<Neighbor>& out_neighbors(std::uint32_t node) const {
        return out_.at(node);
    }
    const std::vector<Neighbor>& in_neighbors(std::uint32_t node) const { return in_.at(node); }

    bool has_edge(std::uint32_t from, std::uint32_t to) const {
        return edge_set_.count((static_cast<std::uint64_t>(from) << 32) | to) > 0;
    }

    // Undirected skeleton neighbors (union of in and out), ascending.
    const std::vector<std::uint32_t>& skeleton(std::uint32_t node) const {
        return skeleton_.at(node);
    }

    friend UserGraph build_user_graph(const CascadeIndex& index);

private:
    std::vector<UserId> nodes_;
    std::vector<std::uint32_t> node_of_user_;  // UserId -> node or UINT32_MAX
    std::vector<std::vector<Neighbor>> out_;
    std::vector<std::vector<Neighbor>> in_;
    std::vector<std::vector<std::uint32_t>> skeleton_;
    std::unordered_set<std::uint64_t> edge_set_;
};

UserGraph build_user_graph(const CascadeIndex& index);

enum class NeighborSide { out, in };

// Eq-15 style weighted co-occurrence score over the chosen neighbor set,
// weights |delta|+1.
Flagged weighted_cooccurrence(const UserGraph& graph, std::uint32_t node, NeighborSide side);

// Probability that user j appears after user i: viral messages where i
// strictly precedes j over all messages containing j.
Flagged precedence_probability(const CascadeIndex& index, UserId j, UserId i);

// Mean precedence probability of i over its related users R(i).
Flagged cm_score(const CascadeIndex& index, UserId i, const std::vector<UserId>& related);

struct UserGraphFeatures {
    Table users;  // one row per key user
};

// Table-III style per-node metrics plus the CM score. `related` is indexed
// by UserId (see all_related_sets).
UserGraphFeatures user_graph_features(const ActionLog& log, const CascadeIndex& index,
                                      const UserGraph& graph,
                                      const std::vector<std::vector<UserId>>& related);

}  // namespace psm
