#include "psm/causality.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "psm/util.hpp"

namespace psm {

namespace {

std::vector<bool> prima_facie_flags(const CascadeIndex& index) {
    std::vector<bool> pf(index.user_count(), false);
    for (UserId u = 0; u < index.user_count(); ++u) {
        if (index.key_viral_message_count(u) == 0) continue;
        const auto p = p_viral_given_key(index, u);
        pf[u] = p.defined && p.value > index.rho();
    }
    return pf;
}

// Collects the users m-related with i (i preceding when forward, i followed
// when !forward) together with the number of messages realizing the
// relation. Ascending user id.
void m_related_neighbors(const CascadeIndex& index, const std::vector<bool>& pf, UserId i,
                         bool forward, std::vector<UserId>& users_out,
                         std::vector<std::uint32_t>& counts_out) {
    users_out.clear();
    counts_out.clear();
    if (!pf[i]) return;
    std::map<UserId, std::uint32_t> counts;
    for (const auto& e : index.user_entries(i)) {
        if (!e.key) continue;
        const auto& c = index.cascade(e.message);
        if (!c.viral) continue;
        for (const auto& p : c.participants) {
            if (p.user == i || !p.key || !pf[p.user]) continue;
            const bool related = forward ? (e.time < p.time) : (p.time < e.time);
            if (related) ++counts[p.user];
        }
    }
    users_out.reserve(counts.size());
    counts_out.reserve(counts.size());
    for (const auto& [u, c] : counts) {
        users_out.push_back(u);
        counts_out.push_back(c);
    }
}

// Pairwise difference term of the Kleinberg-Mishra mean. Pairs with both
// ratios undefined are skipped from numerator and denominator; a single
// undefined side contributes 0.
bool km_term(const PairStats& ps, double& term) {
    const Flagged a = ps.p_ij();
    const Flagged b = ps.p_not_ij();
    if (!a.defined && !b.defined) return false;
    term = a.value - b.value;
    return true;
}

double rel_term(const PairStats& ps, double omega, double cap) {
    const Flagged fa = ps.p_ij();
    const Flagged fb = ps.p_not_ij();
    const double a = fa.value;
    const double b = fb.value;
    double s;
    if (a > b) {
        s = a / (b + omega) - 1.0;
    } else if (a == b) {
        s = 0.0;
    } else {
        s = (a == 0.0) ? -cap : 1.0 - b / a;
    }
    return std::clamp(s, -cap, cap);
}

struct PairwiseScores {
    Flagged km;
    Flagged rel;
    std::uint32_t related_count = 0;
};

PairwiseScores pairwise_scores(const CascadeIndex& index, UserId i,
                               const std::vector<UserId>& related, const CausalityParams& params) {
    PairwiseScores out;
    out.related_count = static_cast<std::uint32_t>(related.size());
    double km_sum = 0.0, rel_sum = 0.0;
    std::int64_t counted = 0;
    for (UserId j : related) {
        const PairStats ps = pair_probabilities(index, i, j);
        double term;
        if (!km_term(ps, term)) continue;
        km_sum += term;
        rel_sum += rel_term(ps, params.omega, params.rel_cap);
        ++counted;
    }
    if (counted > 0) {
        out.km = Flagged::of(km_sum / static_cast<double>(counted));
        out.rel = Flagged::of(rel_sum / static_cast<double>(counted));
    }
    return out;
}

Flagged weighted_neighborhood(const CausalityResult& result, UserId j, const WeightFn& weights) {
    const auto& q = result.q_sets[j];
    const auto& counts = result.q_m_counts[j];
    if (q.empty()) return Flagged::undefined();
    double wsum = 0.0, sum = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) {
        const double w =
            weights ? weights(q[k], j, counts[k]) : static_cast<double>(counts[k]);
        sum += w * result.users[q[k]].eps_km.value;
        wsum += w;
    }
    if (wsum == 0.0) {
        // degenerate custom weights: fall back to the unweighted mean
        double s = 0.0;
        for (UserId i : q) s += result.users[i].eps_km.value;
        return Flagged::of(s / static_cast<double>(q.size()));
    }
    return Flagged::of(sum / wsum);
}

}  // namespace

Flagged p_viral_given_key(const CascadeIndex& index, UserId i) {
    const auto total = index.key_message_count(i);  // range-checks i
    if (total == 0) return Flagged::undefined();
    return Flagged::of(static_cast<double>(index.key_viral_message_count(i)) /
                       static_cast<double>(total));
}

PairStats pair_probabilities(const CascadeIndex& index, UserId i, UserId j) {
    if (i == j) throw UsageError("pair probabilities require two distinct users");
    PairStats ps;
    const auto& ei = index.user_entries(i);
    const auto& ej = index.user_entries(j);
    std::size_t a = 0;
    for (const auto& je : ej) {
        while (a < ei.size() && ei[a].message < je.message) ++a;
        const bool i_present = a < ei.size() && ei[a].message == je.message;
        const bool viral = index.cascade(je.message).viral;
        if (i_present && ei[a].time < je.time) {
            ++ps.joint_all;
            if (viral) ++ps.joint_viral;
        } else {
            // no tuple of i strictly earlier than j's
            ++ps.excl_all;
            if (viral) ++ps.excl_viral;
        }
    }
    return ps;
}

bool prima_facie_user(const CascadeIndex& index, UserId u) {
    if (index.key_viral_message_count(u) == 0) return false;
    const auto p = p_viral_given_key(index, u);
    return p.defined && p.value > index.rho();
}

std::vector<UserId> related_users(const CascadeIndex& index, UserId i) {
    auto pf = prima_facie_flags(index);
    std::vector<UserId> users;
    std::vector<std::uint32_t> counts;
    m_related_neighbors(index, pf, i, /*forward=*/true, users, counts);
    return users;
}

std::vector<UserId> q_set(const CascadeIndex& index, UserId j) {
    auto pf = prima_facie_flags(index);
    std::vector<UserId> users;
    std::vector<std::uint32_t> counts;
    m_related_neighbors(index, pf, j, /*forward=*/false, users, counts);
    return users;
}

Flagged eps_km(const CascadeIndex& index, UserId i) {
    return pairwise_scores(index, i, related_users(index, i), {}).km;
}

Flagged eps_rel(const CascadeIndex& index, UserId i, double omega, double rel_cap) {
    if (!(omega > 0.0)) throw ParameterError("omega must be positive");
    CausalityParams params;
    params.omega = omega;
    params.rel_cap = rel_cap;
    return pairwise_scores(index, i, related_users(index, i), params).rel;
}

Flagged eps_nb(const CascadeIndex& index, UserId j) {
    const auto q = q_set(index, j);
    if (q.empty()) return Flagged::undefined();
    double sum = 0.0;
    for (UserId i : q) sum += eps_km(index, i).value;
    return Flagged::of(sum / static_cast<double>(q.size()));
}

Flagged eps_wnb(const CascadeIndex& index, UserId j, const WeightFn& weights) {
    CausalityResult r = compute_causality(index);
    return weighted_neighborhood(r, j, weights);
}

Table causality_table(const ActionLog& log, const CascadeIndex& index,
                      const CausalityResult& result) {
    Table t;
    t.key_name = "user_id";
    t.columns = {"p_viral_given_key", "p_viral_given_key_defined",
                 "eps_km",            "eps_km_defined",
                 "eps_rel",           "eps_rel_defined",
                 "eps_nb",            "eps_nb_defined",
                 "eps_wnb",           "eps_wnb_defined",
                 "related_count",     "prima_facie"};
    for (UserId u : index.key_users()) {
        const auto& s = result.users[u];
        t.add_row(log.users.name(u),
                  {s.p_viral_given_key.value, s.p_viral_given_key.defined ? 1.0 : 0.0,
                   s.eps_km.value, s.eps_km.defined ? 1.0 : 0.0, s.eps_rel.value,
                   s.eps_rel.defined ? 1.0 : 0.0, s.eps_nb.value, s.eps_nb.defined ? 1.0 : 0.0,
                   s.eps_wnb.value, s.eps_wnb.defined ? 1.0 : 0.0,
                   static_cast<double>(s.related_count), s.prima_facie ? 1.0 : 0.0});
    }
    return t;
}

std::vector<std::vector<UserId>> all_related_sets(const CascadeIndex& index) {
    const std::size_t n = index.user_count();
    std::vector<std::vector<UserId>> related(n);
    const auto pf = prima_facie_flags(index);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<std::uint32_t> counts;
        for (std::size_t u = begin; u < end; ++u) {
            m_related_neighbors(index, pf, static_cast<UserId>(u), /*forward=*/true, related[u],
                                counts);
        }
    });
    return related;
}

CausalityResult compute_causality(const CascadeIndex& index, const CausalityParams& params) {
    if (!(params.omega > 0.0)) throw ParameterError("omega must be positive");
    const std::size_t n = index.user_count();
    CausalityResult r;
    r.params = params;
    r.users.resize(n);
    r.related.resize(n);
    r.related_m_counts.resize(n);
    r.q_sets.resize(n);
    r.q_m_counts.resize(n);

    const auto pf = prima_facie_flags(index);
    for (UserId u = 0; u < n; ++u) {
        r.users[u].p_viral_given_key = index.key_message_count(u) > 0
                                           ? p_viral_given_key(index, u)
                                           : Flagged::undefined();
        r.users[u].prima_facie = pf[u];
    }

    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t u = begin; u < end; ++u) {
            const auto uid = static_cast<UserId>(u);
            m_related_neighbors(index, pf, uid, /*forward=*/true, r.related[u],
                                r.related_m_counts[u]);
            const auto scores = pairwise_scores(index, uid, r.related[u], params);
            r.users[u].eps_km = scores.km;
            r.users[u].eps_rel = scores.rel;
            r.users[u].related_count = scores.related_count;
        }
    });

    // Transpose R into Q; ascending outer loop keeps every Q(j) sorted.
    for (UserId i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < r.related[i].size(); ++k) {
            const UserId j = r.related[i][k];
            r.q_sets[j].push_back(i);
            r.q_m_counts[j].push_back(r.related_m_counts[i][k]);
        }
    }

    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            const auto jid = static_cast<UserId>(j);
            if (r.q_sets[j].empty()) {
                r.users[j].eps_nb = Flagged::undefined();
                r.users[j].eps_wnb = Flagged::undefined();
                continue;
            }
            double sum = 0.0;
            for (UserId i : r.q_sets[j]) sum += r.users[i].eps_km.value;
            r.users[j].eps_nb = Flagged::of(sum / static_cast<double>(r.q_sets[j].size()));
            r.users[j].eps_wnb = weighted_neighborhood(r, jid, nullptr);
        }
    });

    return r;
}

}  // namespace psm
