#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "psm/cascade_index.hpp"
#include "psm/csv.hpp"
#include "psm/types.hpp"

namespace psm {

// Ordered-pair co-participation counts. joint_* are the numerator and
// denominator of p_{i,j} (both users present, i strictly earlier); excl_*
// those of p_{not i,j} (j present and no tuple of i strictly earlier).
struct PairStats {
    std::int64_t joint_viral = 0;
    std::int64_t joint_all = 0;
    std::int64_t excl_viral = 0;
    std::int64_t excl_all = 0;

    Flagged p_ij() const {
        if (joint_all == 0) return Flagged::undefined();
        return Flagged::of(static_cast<double>(joint_viral) / static_cast<double>(joint_all));
    }
    Flagged p_not_ij() const {
        if (excl_all == 0) return Flagged::undefined();
        return Flagged::of(static_cast<double>(excl_viral) / static_cast<double>(excl_all));
    }
};

struct CausalityParams {
    double omega = 1e-9;   // infinitesimal in the relative-likelihood ratio
    double rel_cap = 1e6;  // magnitude bound keeping the feature finite
};

struct UserCausality {
    Flagged p_viral_given_key;
    Flagged eps_km;
    Flagged eps_rel;
    Flagged eps_nb;
    Flagged eps_wnb;
    std::uint32_t related_count = 0;
    bool prima_facie = false;
};

struct CausalityResult {
    CausalityParams params;
    std::vector<UserCausality> users;  // indexed by UserId

    // R(i) and Q(j), ascending ids; m_counts aligned per entry hold the
    // number of messages in which the pair is m-related (the default
    // weights of the weighted neighborhood metric).
    std::vector<std::vector<UserId>> related;
    std::vector<std::vector<std::uint32_t>> related_m_counts;
    std::vector<std::vector<UserId>> q_sets;
    std::vector<std::vector<std::uint32_t>> q_m_counts;
};

// Probability that a cascade goes viral given that user i is a key user of
// it: viral key-messages over all key-messages. Undefined when i is key for
// no message.
Flagged p_viral_given_key(const CascadeIndex& index, UserId i);

PairStats pair_probabilities(const CascadeIndex& index, UserId i, UserId j);

// True iff u is a prima facie causal user of at least one cascade: key user
// of some viral message with p_viral_given_key strictly above the prior.
bool prima_facie_user(const CascadeIndex& index, UserId u);

// R(i): users j != i such that i and j are m-related for some m (both prima
// facie causal and key for m, i strictly preceding j).
std::vector<UserId> related_users(const CascadeIndex& index, UserId i);

// Q(j): transpose of the R relation.
std::vector<UserId> q_set(const CascadeIndex& index, UserId j);

Flagged eps_km(const CascadeIndex& index, UserId i);
Flagged eps_rel(const CascadeIndex& index, UserId i, double omega, double rel_cap = 1e6);
Flagged eps_nb(const CascadeIndex& index, UserId j);

using WeightFn = std::function<double(UserId i, UserId j, std::uint32_t m_related_count)>;

// Weighted neighborhood causality. The default weight of i in Q(j) is the
// number of messages where i and j are m-related; all-zero weights fall
// back to the unweighted mean.
Flagged eps_wnb(const CascadeIndex& index, UserId j, const WeightFn& weights = nullptr);

// Batch computation of everything above for all users, parallel across
// users with fixed per-user iteration order.
CausalityResult compute_causality(const CascadeIndex& index, const CausalityParams& params = {});

// R(i) for every user at once (cheaper than a full compute_causality when
// only the relation is needed, e.g. for the CM score).
std::vector<std::vector<UserId>> all_related_sets(const CascadeIndex& index);

// One row per key user: the four metrics, |R(i)|, prima-facie and
// undefined flags.
Table causality_table(const ActionLog& log, const CascadeIndex& index,
                      const CausalityResult& result);

}  // namespace psm
