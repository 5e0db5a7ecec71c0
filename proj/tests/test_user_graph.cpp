#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "psm/causality.hpp"
#include "psm/rng.hpp"
#include "psm/user_graph.hpp"
#include "test_support.hpp"

using namespace psm;
using testsup::make_log;
using testsup::Rec;

namespace {

double cell(const Table& t, const std::string& key, const std::string& name) {
    const int c = t.column_index(name);
    REQUIRE(c >= 0);
    for (std::size_t r = 0; r < t.size(); ++r) {
        if (t.keys[r] == key) return t.rows[r][static_cast<std::size_t>(c)];
    }
    REQUIRE(false);
    return 0.0;
}

}  // namespace

TEST_SUITE("user_graph") {

TEST_CASE("ordered co-occurrence forces a single directed edge") {
    // i and j co-key in two messages, i always first; i key in 4, j key in 2
    std::vector<Rec> recs;
    for (int k = 0; k < 2; ++k) {  // shared: [i, j, f, f'] sizes 4
        const std::string m = "s" + std::to_string(k);
        recs.push_back({"i", m, 1});
        recs.push_back({"j", m, 2});
        recs.push_back({"x" + std::to_string(k), m, 3});
        recs.push_back({"y" + std::to_string(k), m, 4});
    }
    for (int k = 0; k < 2; ++k) {  // i-only key messages: [i, z] size 2
        const std::string m = "o" + std::to_string(k);
        recs.push_back({"i", m, 1});
        recs.push_back({"z" + std::to_string(k), m, 2});
    }
    const auto log = make_log(recs);
    const auto idx = build_cascade_index(log, 4, 0.5);
    const auto graph = build_user_graph(idx);

    const auto i = *graph.node_of(*log.users.find("i"));
    const auto j = *graph.node_of(*log.users.find("j"));
    REQUIRE(idx.key_message_count(*log.users.find("i")) == 4);
    REQUIRE(idx.key_message_count(*log.users.find("j")) == 2);

    CHECK(graph.has_edge(i, j));
    CHECK_FALSE(graph.has_edge(j, i));
    const auto& out = graph.out_neighbors(i);
    REQUIRE(out.size() == 1);
    CHECK(out[0].node == j);
    CHECK(out[0].co == doctest::Approx(1.0).epsilon(1e-15));  // 2 / min(4,2)
    CHECK(out[0].delta == 2);
}

TEST_CASE("equal ordered counts produce edges in both directions") {
    std::vector<Rec> recs;
    // m1: i before j; m2: j before i; both key in both (size 4, they are first two)
    recs.push_back({"i", "m1", 1});
    recs.push_back({"j", "m1", 2});
    recs.push_back({"a", "m1", 3});
    recs.push_back({"b", "m1", 4});
    recs.push_back({"j", "m2", 1});
    recs.push_back({"i", "m2", 2});
    recs.push_back({"c", "m2", 3});
    recs.push_back({"d", "m2", 4});
    const auto log = make_log(recs);
    const auto idx = build_cascade_index(log, 4, 0.5);
    const auto graph = build_user_graph(idx);
    const auto i = *graph.node_of(*log.users.find("i"));
    const auto j = *graph.node_of(*log.users.find("j"));
    CHECK(graph.has_edge(i, j));
    CHECK(graph.has_edge(j, i));
    CHECK(graph.out_neighbors(i)[0].delta == 0);
}

TEST_CASE("directed 3-cycle: one triangle, clustering one half") {
    std::vector<Rec> recs;
    auto add_pair = [&](const std::string& first, const std::string& second, int tag) {
        const std::string m = "m" + std::to_string(tag);
        recs.push_back({first, m, 1});
        recs.push_back({second, m, 2});
        recs.push_back({"f" + std::to_string(tag) + "a", m, 3});
        recs.push_back({"f" + std::to_string(tag) + "b", m, 4});
    };
    add_pair("a", "b", 0);
    add_pair("b", "c", 1);
    add_pair("c", "a", 2);
    const auto log = make_log(recs);
    const auto idx = build_cascade_index(log, 4, 0.5);
    const auto graph = build_user_graph(idx);
    const auto related = all_related_sets(idx);
    const auto feats = user_graph_features(log, idx, graph, related);

    for (const char* u : {"a", "b", "c"}) {
        CHECK(cell(feats.users, u, "triangles") == 1.0);
        CHECK(cell(feats.users, u, "cc") == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(cell(feats.users, u, "cc_defined") == 1.0);
    }
}

TEST_CASE("isolated key user scores zero with cleared flags") {
    const auto log = make_log({{"u", "m", 1}, {"x", "m", 2}});
    const auto idx = build_cascade_index(log, 5, 0.5);
    const auto graph = build_user_graph(idx);
    const auto related = all_related_sets(idx);
    const auto feats = user_graph_features(log, idx, graph, related);
    REQUIRE(feats.users.size() == 1);  // only "u" is key
    CHECK(feats.users.keys[0] == "u");
    CHECK(cell(feats.users, "u", "degree_out") == 0.0);
    CHECK(cell(feats.users, "u", "COS_out_defined") == 0.0);
    CHECK(cell(feats.users, "u", "COS_in_defined") == 0.0);
    CHECK(cell(feats.users, "u", "COw") == 0.0);
    CHECK(cell(feats.users, "u", "COw_defined") == 0.0);
    CHECK(cell(feats.users, "u", "triangles") == 0.0);
    CHECK(cell(feats.users, "u", "cc_defined") == 0.0);
    CHECK(cell(feats.users, "u", "CM_defined") == 0.0);
}

TEST_CASE("weighted co-occurrence follows the delta-weighted mean") {
    Rng rng(515);
    for (int trial = 0; trial < 5; ++trial) {
        const auto log = testsup::random_log(rng, 20, 14);
        const auto idx = build_cascade_index(log, 3, 0.5);
        const auto graph = build_user_graph(idx);
        for (std::uint32_t n = 0; n < graph.node_count(); ++n) {
            for (const auto side : {NeighborSide::out, NeighborSide::in}) {
                const auto& ns = side == NeighborSide::out ? graph.out_neighbors(n)
                                                           : graph.in_neighbors(n);
                const auto got = weighted_cooccurrence(graph, n, side);
                if (ns.empty()) {
                    CHECK_FALSE(got.defined);
                    continue;
                }
                double num = 0.0, den = 0.0;
                for (const auto& e : ns) {
                    num += (std::abs(static_cast<double>(e.delta)) + 1.0) * e.co;
                    den += std::abs(static_cast<double>(e.delta)) + 1.0;
                }
                CHECK(got.value == doctest::Approx(num / den).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("precedence probability") {
    std::vector<Rec> recs;
    // j participates in 4 messages; i strictly precedes j in 2 viral ones
    for (int k = 0; k < 2; ++k) {  // viral size 3
        const std::string m = "v" + std::to_string(k);
        recs.push_back({"i", m, 1});
        recs.push_back({"j", m, 2});
        recs.push_back({"x" + std::to_string(k), m, 3});
    }
    recs.push_back({"j", "n0", 1});  // small ones without i earlier
    recs.push_back({"j", "n1", 1});
    const auto log = make_log(recs);
    const auto idx = build_cascade_index(log, 3, 0.5);
    const auto p = precedence_probability(idx, *log.users.find("j"), *log.users.find("i"));
    CHECK(p.defined);
    CHECK(p.value == doctest::Approx(0.5).epsilon(1e-15));

    SUBCASE("user with no tuples is undefined") {
        ActionLog ghost = log;
        const auto gid = ghost.users.intern("ghost");
        ghost.verified.resize(ghost.users.size(), false);
        const auto gidx = build_cascade_index(ghost, 3, 0.5);
        CHECK_FALSE(precedence_probability(gidx, gid, *ghost.users.find("i")).defined);
    }
}

TEST_CASE("cm score composes precedence probabilities over R(i)") {
    Rng rng(616);
    const auto log = testsup::random_log(rng, 20, 14);
    const auto idx = build_cascade_index(log, 3, 0.5);
    const auto related = all_related_sets(idx);
    const auto olog = oracle::from_action_log(log, 3, 0.5);
    const auto facts = oracle::compute_facts(olog);
    for (UserId u = 0; u < log.user_count(); ++u) {
        const auto got = cm_score(idx, u, related[u]);
        const auto want = oracle::cm(olog, facts, u);
        CHECK(got.defined == want.defined);
        CHECK(got.value == doctest::Approx(want.value).epsilon(1e-12));
    }
}

TEST_CASE("graph structure matches the brute-force oracle") {
    Rng rng(717);
    for (int trial = 0; trial < 5; ++trial) {
        const auto log = testsup::random_log(rng, 18, 12);
        const auto idx = build_cascade_index(log, 3, 0.5);
        const auto graph = build_user_graph(idx);
        const auto olog = oracle::from_action_log(log, 3, 0.5);
        const auto facts = oracle::compute_facts(olog);

        const auto onodes = oracle::key_users(olog, facts);
        REQUIRE(graph.nodes() == onodes);

        for (std::uint32_t a = 0; a < graph.node_count(); ++a) {
            const UserId ua = graph.user_of(a);
            std::vector<UserId> got_out, got_in;
            for (const auto& e : graph.out_neighbors(a)) got_out.push_back(graph.user_of(e.node));
            for (const auto& e : graph.in_neighbors(a)) got_in.push_back(graph.user_of(e.node));
            CHECK(got_out == oracle::out_neighbors(olog, facts, ua));
            CHECK(got_in == oracle::in_neighbors(olog, facts, ua));

            for (const auto& e : graph.out_neighbors(a)) {
                const UserId ub = graph.user_of(e.node);
                CHECK(e.co == doctest::Approx(oracle::co_score(olog, facts, ua, ub)).epsilon(1e-12));
                CHECK(e.co >= 0.0);
                CHECK(e.co <= 1.0);
                CHECK(e.delta == oracle::delta(olog, facts, ua, ub));
                // direction recount: ordered key counts favor the edge owner
                const auto pc = oracle::pair_counts(olog, facts, ua, ub);
                CHECK(pc.key_before_ij >= pc.key_before_ji);
            }
            // incoming entries carry the owner-perspective ordered numerator
            for (const auto& e : graph.in_neighbors(a)) {
                const UserId ub = graph.user_of(e.node);
                CHECK(e.co == doctest::Approx(oracle::co_score(olog, facts, ua, ub)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("feature table matches the brute-force oracle") {
    Rng rng(818);
    const auto log = testsup::random_log(rng, 18, 12, 0.3);
    const auto idx = build_cascade_index(log, 3, 0.5);
    const auto graph = build_user_graph(idx);
    const auto related = all_related_sets(idx);
    const auto feats = user_graph_features(log, idx, graph, related);
    const auto olog = oracle::from_action_log(log, 3, 0.5);
    const auto facts = oracle::compute_facts(olog);

    for (std::size_t r = 0; r < feats.users.size(); ++r) {
        const std::string& name = feats.users.keys[r];
        const UserId u = *log.users.find(name);
        CHECK(cell(feats.users, name, "degree_out") ==
              static_cast<double>(oracle::out_neighbors(olog, facts, u).size()));
        CHECK(cell(feats.users, name, "triangles") ==
              static_cast<double>(oracle::triangles(olog, facts, u)));
        CHECK(cell(feats.users, name, "cc") ==
              doctest::Approx(oracle::clustering(olog, facts, u)).epsilon(1e-12));

        const auto cow = oracle::weighted_co(olog, facts, u, true);
        CHECK(cell(feats.users, name, "COw") == doctest::Approx(cow.value).epsilon(1e-12));
        CHECK(cell(feats.users, name, "COw_defined") == (cow.defined ? 1.0 : 0.0));

        std::vector<double> cos_out, cos_in;
        for (const auto v : oracle::out_neighbors(olog, facts, u)) {
            cos_out.push_back(oracle::co_score(olog, facts, u, v));
        }
        for (const auto v : oracle::in_neighbors(olog, facts, u)) {
            cos_in.push_back(oracle::co_score(olog, facts, u, v));
        }
        const auto so = oracle::stats(cos_out);
        const auto si = oracle::stats(cos_in);
        CHECK(cell(feats.users, name, "COS_out_avg") == doctest::Approx(so.avg).epsilon(1e-12));
        CHECK(cell(feats.users, name, "COS_out_std") == doctest::Approx(so.std).epsilon(1e-12));
        CHECK(cell(feats.users, name, "COS_in_avg") == doctest::Approx(si.avg).epsilon(1e-12));
        CHECK(cell(feats.users, name, "COS_in_med") == doctest::Approx(si.med).epsilon(1e-12));

        double vout = 0.0, vin = 0.0;
        for (const auto v : oracle::out_neighbors(olog, facts, u)) {
            if (log.is_verified(v)) vout += 1.0;
        }
        for (const auto v : oracle::in_neighbors(olog, facts, u)) {
            if (log.is_verified(v)) vin += 1.0;
        }
        CHECK(cell(feats.users, name, "verified_out") == vout);
        CHECK(cell(feats.users, name, "verified_in") == vin);

        const auto ocm = oracle::cm(olog, facts, u);
        CHECK(cell(feats.users, name, "CM") == doctest::Approx(ocm.value).epsilon(1e-12));
        CHECK(cell(feats.users, name, "CM_defined") == (ocm.defined ? 1.0 : 0.0));

        const double cc = cell(feats.users, name, "cc");
        CHECK(cc >= 0.0);
        CHECK(cc <= 1.0);
    }
}

}  // TEST_SUITE
