#pragma once

// Brute-force reference implementations used as oracles. Everything here
// works by direct nested-loop evaluation of the definitions over the raw
// tuple list, independent of the engine's indexes and inverted structures.
// Iteration is in ascending id order throughout, matching the engine's
// documented accumulation order.

#include <cstdint>
#include <optional>
#include <vector>

#include "psm/action_log.hpp"
#include "psm/causality.hpp"
#include "psm/stats.hpp"
#include "psm/types.hpp"

namespace oracle {

struct Tuple {
    psm::UserId user;
    psm::MessageId message;
    psm::Timestamp time;
};

struct Log {
    std::size_t n_users = 0;
    std::size_t n_messages = 0;
    std::vector<Tuple> tuples;  // deduplicated
    std::vector<bool> verified;
    std::int64_t theta = 1;
    double phi = 0.5;
};

Log from_action_log(const psm::ActionLog& log, std::int64_t theta, double phi);

// ---- definitional primitives ------------------------------------------------
std::optional<psm::Timestamp> time_of(const Log& log, psm::UserId u, psm::MessageId m);
std::size_t cascade_size(const Log& log, psm::MessageId m);
bool is_viral(const Log& log, psm::MessageId m);
bool is_key_user(const Log& log, psm::UserId u, psm::MessageId m);
double rho(const Log& log);

// Memoized primitives: every entry is filled by the definitional functions
// above, computed once. Higher-level oracles take a Facts so the acceptance
// fixtures stay tractable; the formulas themselves are unchanged.
struct Facts {
    std::vector<std::vector<std::optional<psm::Timestamp>>> time;  // [u][m]
    std::vector<std::vector<bool>> key;                            // [u][m]
    std::vector<bool> viral;
    std::vector<std::size_t> size;
    std::vector<bool> pf;  // prima facie causal user of some cascade
    double rho = 0.0;
};
Facts compute_facts(const Log& log);

// ---- causality ----------------------------------------------------------------
psm::Flagged p_viral_given_key(const Log& log, const Facts& f, psm::UserId u);
psm::PairStats pair_stats(const Log& log, const Facts& f, psm::UserId i, psm::UserId j);
bool m_related(const Log& log, const Facts& f, psm::UserId i, psm::UserId j, psm::MessageId m);
std::vector<psm::UserId> related(const Log& log, const Facts& f, psm::UserId i);
std::vector<psm::UserId> qset(const Log& log, const Facts& f, psm::UserId j);
psm::Flagged eps_km(const Log& log, const Facts& f, psm::UserId i);
psm::Flagged eps_rel(const Log& log, const Facts& f, psm::UserId i, double omega, double cap);
std::vector<psm::Flagged> all_eps_km(const Log& log, const Facts& f);
psm::Flagged eps_nb(const Log& log, const Facts& f, psm::UserId j,
                    const std::vector<psm::Flagged>& kms);
psm::Flagged eps_wnb(const Log& log, const Facts& f, psm::UserId j,
                     const std::vector<psm::Flagged>& kms);

// ---- bipartite graph ------------------------------------------------------------
// Dense power iteration; node order users then messages.
std::vector<double> pagerank_dense(const Log& log, double damping, double tol, int max_iter);
double normalized_rank(const Log& log, const Facts& f, psm::UserId u, psm::MessageId m);
double time_decay(const Log& log, const Facts& f, psm::UserId u, psm::MessageId m, double gamma);
psm::StatSummary stats(const std::vector<double>& values);

std::vector<psm::MessageId> user_messages(const Facts& f, psm::UserId u);
std::vector<psm::UserId> co_participants(const Log& log, const Facts& f, psm::UserId u);
std::int64_t intersection_count(const Log& log, const Facts& f, psm::UserId u, psm::UserId v);
double jaccard(const Log& log, const Facts& f, psm::UserId u, psm::UserId v);
std::int64_t verified_in_message(const Log& log, const Facts& f, psm::MessageId m);

// ---- user graph -------------------------------------------------------------------
struct PairCounts {
    std::int64_t key_before_ij = 0;  // both key users of m, i strictly first
    std::int64_t key_before_ji = 0;
    std::int64_t any_before_ij = 0;  // both participants, i strictly first
    std::int64_t any_before_ji = 0;
    bool linked = false;  // both key users of at least one shared message
};
PairCounts pair_counts(const Log& log, const Facts& f, psm::UserId i, psm::UserId j);
std::vector<psm::UserId> key_users(const Log& log, const Facts& f);
std::int64_t key_message_count(const Log& log, const Facts& f, psm::UserId u);
double co_score(const Log& log, const Facts& f, psm::UserId i, psm::UserId j);
std::int64_t delta(const Log& log, const Facts& f, psm::UserId i, psm::UserId j);
bool edge(const Log& log, const Facts& f, psm::UserId i, psm::UserId j);  // directed i->j
std::vector<psm::UserId> out_neighbors(const Log& log, const Facts& f, psm::UserId i);
std::vector<psm::UserId> in_neighbors(const Log& log, const Facts& f, psm::UserId i);
psm::Flagged weighted_co(const Log& log, const Facts& f, psm::UserId i, bool outgoing);
psm::Flagged precedence_probability(const Log& log, const Facts& f, psm::UserId j, psm::UserId i);
psm::Flagged cm(const Log& log, const Facts& f, psm::UserId i);
std::int64_t triangles(const Log& log, const Facts& f, psm::UserId i);
double clustering(const Log& log, const Facts& f, psm::UserId i);

// ---- evaluation ----------------------------------------------------------------------
// Rank statistic with ties counted half (the pairwise-comparison AUC).
double auc_pairwise(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace oracle
