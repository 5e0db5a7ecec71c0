#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "psm/bipartite.hpp"
#include "psm/rng.hpp"
#include "psm/stats.hpp"
#include "test_support.hpp"

using namespace psm;
using testsup::make_log;
using testsup::Rec;

namespace {

int col(const Table& t, const std::string& name) {
    const int i = t.column_index(name);
    REQUIRE(i >= 0);
    return i;
}

double cell(const Table& t, std::size_t row, const std::string& name) {
    return t.rows[row][static_cast<std::size_t>(col(t, name))];
}

std::size_t row_of(const Table& t, const std::string& key) {
    for (std::size_t r = 0; r < t.size(); ++r) {
        if (t.keys[r] == key) return r;
    }
    REQUIRE(false);
    return 0;
}

BipartiteFeatures features_of(const ActionLog& log, const CascadeIndex& idx, double gamma) {
    const auto graph = build_bipartite_graph(log);
    return bipartite_features(log, idx, graph, pagerank(graph), gamma);
}

}  // namespace

TEST_SUITE("bipartite") {

TEST_CASE("pagerank symmetry on tiny graphs") {
    SUBCASE("two users, one message") {
        const auto log = make_log({{"a", "m", 1}, {"b", "m", 2}});
        const auto pr = pagerank(build_bipartite_graph(log));
        CHECK(pr.user_scores[0] == pr.user_scores[1]);
        CHECK(pr.message_scores[0] > pr.user_scores[0]);
    }
    SUBCASE("single user, single message") {
        const auto log = make_log({{"a", "m", 1}});
        const auto pr = pagerank(build_bipartite_graph(log));
        CHECK(pr.user_scores[0] == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(pr.message_scores[0] == doctest::Approx(0.5).epsilon(1e-9));
    }
}

TEST_CASE("pagerank sums to one and matches the dense oracle") {
    Rng rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        const auto log = testsup::random_log(rng, 12, 8);  // about 20 nodes
        const auto graph = build_bipartite_graph(log);
        const auto pr = pagerank(graph);
        const auto olog = oracle::from_action_log(log, 3, 0.5);
        const auto want = oracle::pagerank_dense(olog, 0.85, 1e-8, 100);

        double sum = 0.0;
        for (double v : pr.user_scores) sum += v;
        for (double v : pr.message_scores) sum += v;
        CHECK(std::abs(sum - 1.0) < 1e-9);

        for (std::size_t u = 0; u < log.user_count(); ++u) {
            CHECK(pr.user_scores[u] == doctest::Approx(want[u]).epsilon(1e-8));
            CHECK(pr.user_scores[u] >= 0.0);
        }
        for (std::size_t m = 0; m < log.message_count(); ++m) {
            CHECK(pr.message_scores[m] ==
                  doctest::Approx(want[log.user_count() + m]).epsilon(1e-8));
        }
    }
}

TEST_CASE("normalized rank") {
    const auto log = make_log({{"a", "m", 1}, {"b", "m", 2}, {"c", "m", 3}, {"d", "m", 4}});
    const auto idx = build_cascade_index(log, 2, 0.5);
    CHECK(normalized_rank(idx, *log.users.find("a"), 0) == 1.0);
    CHECK(normalized_rank(idx, *log.users.find("d"), 0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_THROWS_AS(normalized_rank(idx, *log.users.find("a"), 5), DataError);

    SUBCASE("shuffled message matches the sort oracle for every participant") {
        Rng rng(17);
        std::vector<Rec> recs;
        for (int k = 0; k < 40; ++k) {
            recs.push_back({"u" + std::to_string(k), "big",
                            static_cast<Timestamp>(rng.next_below(25))});
        }
        const auto big = make_log(recs);
        const auto bidx = build_cascade_index(big, 5, 0.5);
        const auto olog = oracle::from_action_log(big, 5, 0.5);
        const auto facts = oracle::compute_facts(olog);
        for (UserId u = 0; u < big.user_count(); ++u) {
            CHECK(normalized_rank(bidx, u, 0) == oracle::normalized_rank(olog, facts, u, 0));
        }
    }
}

TEST_CASE("normalized rank bounds and uniqueness of the top slot") {
    const auto log = make_log({{"a", "m", 10}, {"b", "m", 20}, {"c", "m", 30}});
    const auto idx = build_cascade_index(log, 2, 0.5);
    int top = 0;
    for (UserId u = 0; u < 3; ++u) {
        const double nr = normalized_rank(idx, u, 0);
        CHECK(nr > 0.0);
        CHECK(nr <= 1.0);
        if (nr == 1.0) ++top;
    }
    CHECK(top == 1);
}

TEST_CASE("time decay") {
    const auto log = make_log({{"a", "m", 100}, {"b", "m", 200}});
    const auto idx = build_cascade_index(log, 2, 0.5);
    CHECK(time_decay(idx, *log.users.find("a"), 0, 0.05) == 1.0);
    CHECK(time_decay(idx, *log.users.find("b"), 0, 0.0) == 1.0);
    CHECK(time_decay(idx, *log.users.find("b"), 0, 0.01) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK_THROWS_AS(time_decay(idx, 0, 0, -1.0), ParameterError);

    // monotone non-increasing in the delay
    double prev = 1.0;
    for (Timestamp dt : {0, 10, 50, 200}) {
        const auto l2 = make_log({{"a", "m", 0}, {"b", "m", dt}});
        const auto i2 = build_cascade_index(l2, 2, 0.5);
        const double v = time_decay(i2, 1, 0, 0.01);
        CHECK(v <= prev);
        CHECK(v > 0.0);
        prev = v;
    }
}

TEST_CASE("default gamma is the reciprocal median cascade duration") {
    const auto log = make_log({{"a", "m1", 0}, {"b", "m1", 10},   // duration 10
                               {"c", "m2", 5}, {"d", "m2", 25},   // duration 20
                               {"e", "m3", 0}, {"f", "m3", 40}}); // duration 40
    const auto idx = build_cascade_index(log, 2, 0.5);
    CHECK(default_gamma(idx) == doctest::Approx(1.0 / 20.0).epsilon(1e-15));
}

TEST_CASE("singleton cascade statistics") {
    std::vector<Rec> recs;
    for (int k = 0; k < 7; ++k) {
        recs.push_back({"u" + std::to_string(k), "m", static_cast<Timestamp>(k)});
    }
    const auto log = make_log(recs);
    const auto idx = build_cascade_index(log, 3, 0.5);
    const auto feats = features_of(log, idx, 0.0);
    const auto r = row_of(feats.users, "u0");
    for (const char* stat : {"CS_sum", "CS_max", "CS_min", "CS_avg", "CS_med"}) {
        CHECK(cell(feats.users, r, stat) == 7.0);
    }
    CHECK(cell(feats.users, r, "CS_std") == 0.0);
    CHECK(cell(feats.users, r, "CS_defined") == 1.0);
    CHECK(cell(feats.users, r, "degree") == 1.0);
}

TEST_CASE("full statistics families match the brute-force oracle") {
    Rng rng(3003);
    for (int trial = 0; trial < 5; ++trial) {
        const auto log = testsup::random_log(rng, 15, 10, 0.3);
        const auto idx = build_cascade_index(log, 3, 0.5);
        const auto gamma = default_gamma(idx);
        const auto feats = features_of(log, idx, gamma);
        const auto olog = oracle::from_action_log(log, 3, 0.5);
        const auto facts = oracle::compute_facts(olog);
        const auto opr = oracle::pagerank_dense(olog, 0.85, 1e-8, 100);

        for (std::size_t r = 0; r < feats.users.size(); ++r) {
            const auto u = *log.users.find(feats.users.keys[r]);
            const auto msgs = oracle::user_messages(facts, u);

            std::vector<double> cs, ps, nrs, ts, uvs, js, is;
            for (const auto m : msgs) {
                cs.push_back(static_cast<double>(oracle::cascade_size(olog, m)));
                ps.push_back(opr[log.user_count() + m]);
                nrs.push_back(oracle::normalized_rank(olog, facts, u, m));
                ts.push_back(oracle::time_decay(olog, facts, u, m, gamma));
                uvs.push_back(static_cast<double>(oracle::verified_in_message(olog, facts, m)));
            }
            for (const auto v : oracle::co_participants(olog, facts, u)) {
                js.push_back(oracle::jaccard(olog, facts, u, v));
                is.push_back(static_cast<double>(oracle::intersection_count(olog, facts, u, v)));
            }
            const struct {
                const char* prefix;
                const std::vector<double>* values;
            } fams[] = {{"CS", &cs}, {"PS", &ps},  {"JS", &js}, {"IS", &is},
                        {"NRS", &nrs}, {"TS", &ts}, {"UvS", &uvs}};
            for (const auto& fam : fams) {
                const auto want = oracle::stats(*fam.values);
                const char* suffixes[6] = {"sum", "max", "min", "avg", "med", "std"};
                const double got[6] = {
                    cell(feats.users, r, std::string(fam.prefix) + "_sum"),
                    cell(feats.users, r, std::string(fam.prefix) + "_max"),
                    cell(feats.users, r, std::string(fam.prefix) + "_min"),
                    cell(feats.users, r, std::string(fam.prefix) + "_avg"),
                    cell(feats.users, r, std::string(fam.prefix) + "_med"),
                    cell(feats.users, r, std::string(fam.prefix) + "_std")};
                const double wanted[6] = {want.sum, want.max, want.min,
                                          want.avg, want.med, want.std};
                for (int k = 0; k < 6; ++k) {
                    INFO(fam.prefix << "_" << suffixes[k] << " for " << feats.users.keys[r]);
                    CHECK(got[k] == doctest::Approx(wanted[k]).epsilon(1e-12));
                }
                CHECK(cell(feats.users, r, std::string(fam.prefix) + "_defined") ==
                      (want.defined ? 1.0 : 0.0));
            }
            CHECK(cell(feats.users, r, "degree") == static_cast<double>(msgs.size()));
            CHECK(cell(feats.users, r, "pagerank") == doctest::Approx(opr[u]).epsilon(1e-12));
        }

        // per-message table carries Vr
        for (std::size_t r = 0; r < feats.messages.size(); ++r) {
            const auto m = *log.messages.find(feats.messages.keys[r]);
            CHECK(cell(feats.messages, r, "Vr") ==
                  static_cast<double>(oracle::verified_in_message(olog, facts, m)));
            CHECK(cell(feats.messages, r, "size") ==
                  static_cast<double>(oracle::cascade_size(olog, m)));
        }
    }
}

TEST_CASE("statistic families are internally ordered") {
    Rng rng(9090);
    const auto log = testsup::random_log(rng, 20, 12);
    const auto idx = build_cascade_index(log, 3, 0.5);
    const auto feats = features_of(log, idx, default_gamma(idx));
    for (std::size_t r = 0; r < feats.users.size(); ++r) {
        for (const char* fam : {"CS", "PS", "JS", "IS", "NRS", "TS", "UvS"}) {
            if (cell(feats.users, r, std::string(fam) + "_defined") == 0.0) continue;
            const double mn = cell(feats.users, r, std::string(fam) + "_min");
            const double av = cell(feats.users, r, std::string(fam) + "_avg");
            const double mx = cell(feats.users, r, std::string(fam) + "_max");
            const double md = cell(feats.users, r, std::string(fam) + "_med");
            CHECK(mn <= av + 1e-12);
            CHECK(av <= mx + 1e-12);
            CHECK(md >= mn - 1e-12);
            CHECK(md <= mx + 1e-12);
        }
    }
}

TEST_CASE("empty statistics are zero with a cleared flag") {
    const auto s = summarize({});
    CHECK_FALSE(s.defined);
    CHECK(s.sum == 0.0);
    CHECK(s.max == 0.0);
    CHECK(s.std == 0.0);
    // even-length median is the mean of the middles
    const auto e = summarize(std::vector<double>{1.0, 2.0, 3.0, 10.0});
    CHECK(e.med == 2.5);
}

TEST_CASE("jaccard values bounded and symmetric on the oracle") {
    Rng rng(66);
    const auto log = testsup::random_log(rng, 15, 10);
    const auto olog = oracle::from_action_log(log, 3, 0.5);
    const auto facts = oracle::compute_facts(olog);
    for (UserId u = 0; u < log.user_count(); ++u) {
        for (const auto v : oracle::co_participants(olog, facts, u)) {
            const double js = oracle::jaccard(olog, facts, u, v);
            CHECK(js >= 0.0);
            CHECK(js <= 1.0);
            CHECK(js == doctest::Approx(oracle::jaccard(olog, facts, v, u)).epsilon(1e-15));
        }
    }
}

TEST_CASE("mismatched log and index fingerprints are rejected") {
    const auto log_a = make_log({{"a", "m", 1}, {"b", "m", 2}});
    const auto log_b = make_log({{"x", "m", 1}, {"y", "m", 2}});
    const auto idx_a = build_cascade_index(log_a, 2, 0.5);
    const auto graph_b = build_bipartite_graph(log_b);
    CHECK_THROWS_AS(bipartite_features(log_b, idx_a, graph_b, pagerank(graph_b), 0.0), DataError);
}

}  // TEST_SUITE
