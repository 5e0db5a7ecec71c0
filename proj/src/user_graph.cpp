#include "psm/user_graph.hpp"

#include <algorithm>
#include <unordered_map>

#include "psm/stats.hpp"
#include "psm/util.hpp"

namespace psm {

std::optional<std::uint32_t> UserGraph::node_of(UserId u) const {
    if (u >= node_of_user_.size() || node_of_user_[u] == UINT32_MAX) return std::nullopt;
    return node_of_user_[u];
}

UserGraph build_user_graph(const CascadeIndex& index) {
    UserGraph g;
    g.nodes_ = index.key_users();
    g.node_of_user_.assign(index.user_count(), UINT32_MAX);
    for (std::uint32_t n = 0; n < g.nodes_.size(); ++n) g.node_of_user_[g.nodes_[n]] = n;

    auto pair_key = [](std::uint32_t a, std::uint32_t b) {
        return (static_cast<std::uint64_t>(a) << 32) | b;
    };

    // key_before: m where both key users of m and first strictly precedes.
    // cokey: unordered pair linked (both key users of some shared message).
    // before_any: ordered co-occurrence over all messages (key or not),
    // restricted to node pairs; feeds delta (Eq-16 style, no key clause).
    std::unordered_map<std::uint64_t, std::uint32_t> key_before;
    std::unordered_map<std::uint64_t, std::uint32_t> before_any;
    std::unordered_set<std::uint64_t> cokey;

    for (const auto& c : index.cascades()) {
        const auto& ps = c.participants;
        for (std::size_t x = 0; x < ps.size(); ++x) {
            const auto na = g.node_of_user_[ps[x].user];
            if (na == UINT32_MAX) continue;
            for (std::size_t y = x + 1; y < ps.size(); ++y) {
                const auto nb = g.node_of_user_[ps[y].user];
                if (nb == UINT32_MAX) continue;
                const bool strict = ps[x].time < ps[y].time;  // sorted, so never >
                if (strict) ++before_any[pair_key(na, nb)];
                if (ps[x].key && ps[y].key) {
                    cokey.insert(pair_key(std::min(na, nb), std::max(na, nb)));
                    if (strict) ++key_before[pair_key(na, nb)];
                }
            }
        }
    }

    g.out_.resize(g.nodes_.size());
    g.in_.resize(g.nodes_.size());
    g.skeleton_.resize(g.nodes_.size());

    auto count_of = [](const std::unordered_map<std::uint64_t, std::uint32_t>& m,
                       std::uint64_t k) -> std::int64_t {
        auto it = m.find(k);
        return it == m.end() ? 0 : static_cast<std::int64_t>(it->second);
    };

    for (const std::uint64_t pk : cokey) {
        const auto a = static_cast<std::uint32_t>(pk >> 32);
        const auto b = static_cast<std::uint32_t>(pk & 0xffffffffULL);
        const std::int64_t ab = count_of(key_before, pair_key(a, b));
        const std::int64_t ba = count_of(key_before, pair_key(b, a));
        const std::int64_t any_ab = count_of(before_any, pair_key(a, b));
        const std::int64_t any_ba = count_of(before_any, pair_key(b, a));
        const double minden = static_cast<double>(
            std::min(index.key_message_count(g.nodes_[a]), index.key_message_count(g.nodes_[b])));
        const double co_ab = static_cast<double>(ab) / minden;
        const double co_ba = static_cast<double>(ba) / minden;
        const std::int64_t delta_ab = any_ab - any_ba;

        if (ab >= ba) {  // edge a -> b
            g.edge_set_.insert(pair_key(a, b));
            g.out_[a].push_back({b, co_ab, delta_ab});
            g.in_[b].push_back({a, co_ba, -delta_ab});
        }
        if (ba >= ab) {  // edge b -> a
            g.edge_set_.insert(pair_key(b, a));
            g.out_[b].push_back({a, co_ba, -delta_ab});
            g.in_[a].push_back({b, co_ab, delta_ab});
        }
        g.skeleton_[a].push_back(b);
        g.skeleton_[b].push_back(a);
    }

    auto by_node = [](const UserGraph::Neighbor& x, const UserGraph::Neighbor& y) {
        return x.node < y.node;
    };
    for (auto& v : g.out_) std::sort(v.begin(), v.end(), by_node);
    for (auto& v : g.in_) std::sort(v.begin(), v.end(), by_node);
    for (auto& v : g.skeleton_) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return g;
}

Flagged weighted_cooccurrence(const UserGraph& graph, std::uint32_t node, NeighborSide side) {
    const auto& ns =
        side == NeighborSide::out ? graph.out_neighbors(node) : graph.in_neighbors(node);
    if (ns.empty()) return Flagged::undefined();
    double num = 0.0, den = 0.0;
    for (const auto& e : ns) {
        const double w = static_cast<double>(std::abs(e.delta)) + 1.0;
        num += w * e.co;
        den += w;
    }
    return Flagged::of(num / den);
}

Flagged precedence_probability(const CascadeIndex& index, UserId j, UserId i) {
    const auto& ej = index.user_entries(j);
    if (ej.empty()) return Flagged::undefined();
    if (i == j) throw UsageError("precedence probability requires two distinct users");
    const auto& ei = index.user_entries(i);
    std::int64_t num = 0;
    std::size_t a = 0;
    for (const auto& je : ej) {
        while (a < ei.size() && ei[a].message < je.message) ++a;
        if (a < ei.size() && ei[a].message == je.message && ei[a].time < je.time &&
            index.cascade(je.message).viral) {
            ++num;
        }
    }
    return Flagged::of(static_cast<double>(num) / static_cast<double>(ej.size()));
}

Flagged cm_score(const CascadeIndex& index, UserId i, const std::vector<UserId>& related) {
    if (related.empty()) return Flagged::undefined();
    double sum = 0.0;
    for (UserId j : related) sum += precedence_probability(index, j, i).value;
    return Flagged::of(sum / static_cast<double>(related.size()));
}

UserGraphFeatures user_graph_features(const ActionLog& log, const CascadeIndex& index,
                                      const UserGraph& graph,
                                      const std::vector<std::vector<UserId>>& related) {
    if (index.log_fingerprint() != log.fingerprint()) {
        throw DataError("log/index fingerprint mismatch");
    }
    UserGraphFeatures out;
    Table& t = out.users;
    t.key_name = "user_id";
    t.columns = {"degree_out"};
    for (const char* fam : {"COS_out", "COS_in"}) {
        for (const char* s : kStatNames) t.columns.push_back(std::string(fam) + "_" + s);
        t.columns.push_back(std::string(fam) + "_defined");
    }
    for (const char* c : {"COw", "COw_defined", "verified_out", "verified_in", "triangles", "cc",
                          "cc_defined", "CM", "CM_defined"}) {
        t.columns.emplace_back(c);
    }

    const std::size_t n = graph.node_count();
    t.keys.resize(n);
    t.rows.resize(n);

    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t node = begin; node < end; ++node) {
            const auto nid = static_cast<std::uint32_t>(node);
            const UserId u = graph.user_of(nid);
            std::vector<double> row;
            row.reserve(t.columns.size());
            row.push_back(static_cast<double>(graph.out_neighbors(nid).size()));

            for (NeighborSide side : {NeighborSide::out, NeighborSide::in}) {
                const auto& ns = side == NeighborSide::out ? graph.out_neighbors(nid)
                                                           : graph.in_neighbors(nid);
                std::vector<double> cos;
                cos.reserve(ns.size());
                for (const auto& e : ns) cos.push_back(e.co);
                const auto s = summarize(cos);
                for (int k = 0; k < 6; ++k) row.push_back(stat_by_index(s, k));
                row.push_back(s.defined ? 1.0 : 0.0);
            }

            const auto cow = weighted_cooccurrence(graph, nid, NeighborSide::out);
            row.push_back(cow.value);
            row.push_back(cow.defined ? 1.0 : 0.0);

            double ver_out = 0.0, ver_in = 0.0;
            for (const auto& e : graph.out_neighbors(nid)) {
                if (log.is_verified(graph.user_of(e.node))) ver_out += 1.0;
            }
            for (const auto& e : graph.in_neighbors(nid)) {
                if (log.is_verified(graph.user_of(e.node))) ver_in += 1.0;
            }
            row.push_back(ver_out);
            row.push_back(ver_in);

            // triangles on the undirected skeleton; clustering over ordered
            // neighbor pairs with a directed edge, N = in/out union
            const auto& sk = graph.skeleton(nid);
            std::int64_t triangles = 0, closed = 0;
            for (std::size_t x = 0; x < sk.size(); ++x) {
                for (std::size_t y = x + 1; y < sk.size(); ++y) {
                    const bool jk = graph.has_edge(sk[x], sk[y]);
                    const bool kj = graph.has_edge(sk[y], sk[x]);
                    if (jk || kj) ++triangles;
                    closed += (jk ? 1 : 0) + (kj ? 1 : 0);
                }
            }
            row.push_back(static_cast<double>(triangles));
            const double nn = static_cast<double>(sk.size());
            const bool cc_def = sk.size() >= 2;
            row.push_back(cc_def ? static_cast<double>(closed) / (nn * (nn - 1.0)) : 0.0);
            row.push_back(cc_def ? 1.0 : 0.0);

            const auto cm = cm_score(index, u, related[u]);
            row.push_back(cm.value);
            row.push_back(cm.defined ? 1.0 : 0.0);

            t.keys[node] = log.users.name(u);
            t.rows[node] = std::move(row);
        }
    });
    return out;
}

}  // namespace psm
