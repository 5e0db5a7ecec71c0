#include "psm/bipartite.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "psm/stats.hpp"
#include "psm/util.hpp"

namespace psm {

BipartiteGraph build_bipartite_graph(const ActionLog& log) {
    BipartiteGraph g;
    g.user_adj.resize(log.user_count());
    g.msg_adj.resize(log.message_count());
    for (const auto& t : log.tuples) {
        g.user_adj[t.user].push_back(t.message);
        g.msg_adj[t.message].push_back(t.user);
    }
    for (auto& a : g.user_adj) std::sort(a.begin(), a.end());
    for (auto& a : g.msg_adj) std::sort(a.begin(), a.end());
    return g;
}

PageRankResult pagerank(const BipartiteGraph& graph, const PageRankParams& params) {
    const std::size_t nu = graph.user_count();
    const std::size_t nm = graph.message_count();
    const std::size_t n = nu + nm;
    if (n == 0) throw DataError("pagerank on empty graph");

    // node order: users first, then messages
    auto degree = [&](std::size_t v) -> std::size_t {
        return v < nu ? graph.user_adj[v].size() : graph.msg_adj[v - nu].size();
    };
    std::vector<double> inv_degree(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
        if (degree(v) > 0) inv_degree[v] = 1.0 / static_cast<double>(degree(v));
    }

    std::vector<double> pr(n, 1.0 / static_cast<double>(n));
    std::vector<double> next(n, 0.0);
    const double d = params.damping;
    const double base = (1.0 - d) / static_cast<double>(n);

    PageRankResult res;
    for (int iter = 0; iter < params.max_iter; ++iter) {
        double dangling = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            if (degree(v) == 0) dangling += pr[v];
        }
        const double dangling_share = dangling / static_cast<double>(n);
        for (std::size_t v = 0; v < n; ++v) {
            double s = 0.0;
            if (v < nu) {
                for (MessageId m : graph.user_adj[v]) {
                    const std::size_t w = nu + m;
                    s += pr[w] * inv_degree[w];
                }
            } else {
                for (UserId u : graph.msg_adj[v - nu]) {
                    s += pr[u] * inv_degree[u];
                }
            }
            next[v] = base + d * (s + dangling_share);
        }
        double maxdiff = 0.0;
        for (std::size_t v = 0; v < n; ++v) maxdiff = std::max(maxdiff, std::abs(next[v] - pr[v]));
        pr.swap(next);
        res.iterations = iter + 1;
        if (maxdiff < params.tol) {
            res.converged = true;
            break;
        }
    }

    res.user_scores.assign(pr.begin(), pr.begin() + static_cast<std::ptrdiff_t>(nu));
    res.message_scores.assign(pr.begin() + static_cast<std::ptrdiff_t>(nu), pr.end());
    return res;
}

namespace {

const CascadeIndex::UserEntry& find_edge(const CascadeIndex& index, UserId u, MessageId m) {
    const auto& entries = index.user_entries(u);
    auto it = std::lower_bound(
        entries.begin(), entries.end(), m,
        [](const CascadeIndex::UserEntry& e, MessageId mm) { return e.message < mm; });
    if (it == entries.end() || it->message != m) {
        throw DataError("user did not participate in message");
    }
    return *it;
}

}  // namespace

double normalized_rank(const CascadeIndex& index, UserId u, MessageId m) {
    const auto& e = find_edge(index, u, m);
    const double n = static_cast<double>(index.cascade(m).size());
    return 1.0 - static_cast<double>(e.rank) / n;
}

double time_decay(const CascadeIndex& index, UserId u, MessageId m, double gamma) {
    if (gamma < 0.0) throw ParameterError("gamma must be >= 0");
    const auto& e = find_edge(index, u, m);
    const double dt = static_cast<double>(e.time - index.cascade(m).start_time());
    return std::exp(-gamma * dt);
}

double default_gamma(const CascadeIndex& index) {
    std::vector<double> durations;
    durations.reserve(index.message_count());
    for (const auto& c : index.cascades()) {
        durations.push_back(static_cast<double>(c.end_time() - c.start_time()));
    }
    if (durations.empty()) return 0.0;
    std::sort(durations.begin(), durations.end());
    const std::size_t mid = durations.size() / 2;
    const double med = (durations.size() % 2 == 1)
                           ? durations[mid]
                           : (durations[mid - 1] + durations[mid]) / 2.0;
    return med > 0.0 ? 1.0 / med : 0.0;
}

namespace {

void append_family(std::vector<std::string>& cols, const char* prefix) {
    for (const char* s : kStatNames) cols.push_back(std::string(prefix) + "_" + s);
    cols.push_back(std::string(prefix) + "_defined");
}

void push_family(std::vector<double>& row, const StatSummary& s) {
    for (int k = 0; k < 6; ++k) row.push_back(stat_by_index(s, k));
    row.push_back(s.defined ? 1.0 : 0.0);
}

}  // namespace

BipartiteFeatures bipartite_features(const ActionLog& log, const CascadeIndex& index,
                                     const BipartiteGraph& graph, const PageRankResult& pr,
                                     double gamma) {
    if (index.log_fingerprint() != log.fingerprint()) {
        throw DataError("log/index fingerprint mismatch");
    }
    if (gamma < 0.0) throw ParameterError("gamma must be >= 0");

    BipartiteFeatures out;
    out.gamma = gamma;

    std::vector<std::uint32_t> verified_per_msg(index.message_count(), 0);
    for (MessageId m = 0; m < index.message_count(); ++m) {
        for (UserId u : graph.msg_adj[m]) {
            if (log.is_verified(u)) ++verified_per_msg[m];
        }
    }

    const auto& key_users = index.key_users();
    Table& t = out.users;
    t.key_name = "user_id";
    t.columns = {"degree", "pagerank"};
    for (const char* fam : {"CS", "PS", "JS", "IS", "NRS", "TS", "UvS"}) {
        append_family(t.columns, fam);
    }
    t.keys.resize(key_users.size());
    t.rows.resize(key_users.size());

    parallel_for(key_users.size(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> vals;
        for (std::size_t k = begin; k < end; ++k) {
            const UserId u = key_users[k];
            const auto& msgs = graph.user_adj[u];
            std::vector<double> row;
            row.reserve(t.columns.size());
            row.push_back(static_cast<double>(msgs.size()));
            row.push_back(pr.user_scores[u]);

            vals.clear();
            for (MessageId m : msgs) vals.push_back(static_cast<double>(index.cascade(m).size()));
            push_family(row, summarize(vals));

            vals.clear();
            for (MessageId m : msgs) vals.push_back(pr.message_scores[m]);
            push_family(row, summarize(vals));

            // co-participants: |N_u ∩ N_u'| via the inverted message index
            std::unordered_map<UserId, std::uint32_t> inter;
            for (MessageId m : msgs) {
                for (UserId v : graph.msg_adj[m]) {
                    if (v != u) ++inter[v];
                }
            }
            std::vector<std::pair<UserId, std::uint32_t>> co(inter.begin(), inter.end());
            std::sort(co.begin(), co.end());
            std::vector<double> js, is;
            js.reserve(co.size());
            is.reserve(co.size());
            for (const auto& [v, cnt] : co) {
                const double uni = static_cast<double>(msgs.size()) +
                                   static_cast<double>(graph.user_adj[v].size()) -
                                   static_cast<double>(cnt);
                js.push_back(static_cast<double>(cnt) / uni);
                is.push_back(static_cast<double>(cnt));
            }
            push_family(row, summarize(js));
            push_family(row, summarize(is));

            vals.clear();
            for (MessageId m : msgs) vals.push_back(normalized_rank(index, u, m));
            push_family(row, summarize(vals));

            vals.clear();
            for (MessageId m : msgs) vals.push_back(time_decay(index, u, m, gamma));
            push_family(row, summarize(vals));

            vals.clear();
            for (MessageId m : msgs) vals.push_back(static_cast<double>(verified_per_msg[m]));
            push_family(row, summarize(vals));

            t.keys[k] = log.users.name(u);
            t.rows[k] = std::move(row);
        }
    });

    Table& mt = out.messages;
    mt.key_name = "message_id";
    mt.columns = {"size", "viral", "pagerank", "Vr"};
    for (MessageId m = 0; m < index.message_count(); ++m) {
        mt.add_row(log.messages.name(m),
                   {static_cast<double>(index.cascade(m).size()),
                    index.cascade(m).viral ? 1.0 : 0.0, pr.message_scores[m],
                    static_cast<double>(verified_per_msg[m])});
    }
    return out;
}

}  // namespace psm
