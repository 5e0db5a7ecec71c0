#include <doctest.h>

#include <algorithm>
#include <map>

#include "oracles.hpp"
#include "psm/action_log.hpp"
#include "psm/cascade_index.hpp"
#include "psm/rng.hpp"
#include "test_support.hpp"

using namespace psm;
using testsup::make_log;
using testsup::Rec;

TEST_SUITE("action_log") {

TEST_CASE("dedup keeps the earliest occurrence per (user, message)") {
    const auto log = make_log({{"u1", "m1", 5}, {"u1", "m1", 9}, {"u2", "m1", 7}});
    REQUIRE(log.tuples.size() == 2);
    CHECK(log.users.name(log.tuples[0].user) == "u1");
    CHECK(log.tuples[0].time == 5);
    CHECK(log.users.name(log.tuples[1].user) == "u2");
    CHECK(log.tuples[1].time == 7);
}

TEST_CASE("dedup keeps the minimum time even when it arrives later") {
    const auto log = make_log({{"u1", "m1", 9}, {"u2", "m1", 7}, {"u1", "m1", 5}});
    REQUIRE(log.tuples.size() == 2);
    // survivor of (u1,m1) is the time-5 record, ordered by its own position
    CHECK(log.tuples[0].time == 7);
    CHECK(log.tuples[1].time == 5);
}

TEST_CASE("equal-time duplicates keep the first ingestion") {
    IngestReport rep;
    std::vector<RawAction> recs{{"a", "m", 3}, {"a", "m", 3}};
    const auto log = ingest_records(recs, {}, &rep);
    CHECK(log.tuples.size() == 1);
    CHECK(rep.duplicates_dropped == 1);
}

TEST_CASE("empty input is an error") {
    CHECK_THROWS_WITH_AS(make_log({}), "empty action log", DataError);
}

TEST_CASE("lenient fixture: malformed line warned, duplicate dropped") {
    const auto dir = testsup::temp_dir("ingest");
    // 11 data lines: 9 distinct pairs, 1 duplicate of an earlier pair, 1 malformed
    testsup::write_file(dir + "/actions.csv",
                        "user_id,message_id,timestamp\n"
                        "u1,m1,10\n"
                        "u2,m1,20\n"
                        "u3,m1,30\n"
                        "u1,m2,5\n"
                        "u2,m2,15\n"
                        "u1,m1,40\n"          // duplicate pair, later time
                        "u4,m2,not-a-time\n"  // malformed
                        "u4,m3,1\n"
                        "u5,m3,2\n"
                        "u6,m3,3\n"
                        "u7,m3,4\n");
    IngestReport rep;
    const auto log = ingest_actions_file(dir + "/actions.csv", std::nullopt, ParseMode::lenient,
                                         ActionFormat::autodetect, &rep);
    CHECK(log.tuples.size() == 9);
    CHECK(rep.malformed == 1);
    CHECK(rep.duplicates_dropped == 1);
    REQUIRE(rep.warnings.size() == 1);
    CHECK(rep.warnings[0].find(":8:") != std::string::npos);  // line number reported

    SUBCASE("strict mode aborts with the line number") {
        CHECK_THROWS_AS(ingest_actions_file(dir + "/actions.csv", std::nullopt, ParseMode::strict),
                        DataError);
    }
}

TEST_CASE("jsonl ingestion") {
    const auto dir = testsup::temp_dir("jsonl");
    testsup::write_file(dir + "/actions.jsonl",
                        R"({"user_id":"a","message_id":"m","timestamp":4})"
                        "\n"
                        R"({"user_id":"b","message_id":"m","timestamp":2})"
                        "\n");
    const auto log = ingest_actions_file(dir + "/actions.jsonl", std::nullopt);
    REQUIRE(log.tuples.size() == 2);
    const auto idx = build_cascade_index(log, 2, 0.5);
    const auto parts = idx.participants(0);
    CHECK(log.users.name(parts[0]) == "b");  // sorted by time
}

TEST_CASE("verified users restricted to users present in the log") {
    const auto log = make_log({{"a", "m", 1}, {"b", "m", 2}}, {"a", "ghost"});
    CHECK(log.is_verified(*log.users.find("a")));
    CHECK_FALSE(log.is_verified(*log.users.find("b")));
    CHECK(log.user_count() == 2);
}

TEST_CASE("key users: participants at times 1..4 with phi 0.5") {
    const auto log = make_log({{"a", "m", 1}, {"b", "m", 2}, {"c", "m", 3}, {"d", "m", 4}});
    const auto idx = build_cascade_index(log, 100, 0.5);
    const auto& ps = idx.cascade(0).participants;
    CHECK(ps[0].key);
    CHECK(ps[1].key);
    CHECK_FALSE(ps[2].key);
    CHECK_FALSE(ps[3].key);
}

TEST_CASE("equal timestamps never count as later") {
    // times [1,1,2]: 3*0.5 = 1.5 > 1 strictly-later for the t=1 users
    const auto log = make_log({{"a", "m", 1}, {"b", "m", 1}, {"c", "m", 2}});
    const auto idx = build_cascade_index(log, 100, 0.5);
    for (const auto& p : idx.cascade(0).participants) CHECK_FALSE(p.key);
}

TEST_CASE("rho counts viral messages") {
    std::vector<Rec> recs;
    for (int m = 0; m < 10; ++m) {
        const int size = m < 3 ? 4 : 2;
        for (int k = 0; k < size; ++k) {
            recs.push_back({"u" + std::to_string(m * 10 + k), "m" + std::to_string(m),
                            static_cast<Timestamp>(k)});
        }
    }
    const auto idx = build_cascade_index(make_log(recs), 4, 0.5);
    CHECK(idx.viral_count() == 3);
    CHECK(idx.rho() == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("parameter validation") {
    const auto log = make_log({{"a", "m", 1}});
    CHECK_THROWS_AS(build_cascade_index(log, 1, 0.0), ParameterError);
    CHECK_THROWS_AS(build_cascade_index(log, 1, 1.0), ParameterError);
    CHECK_THROWS_AS(build_cascade_index(log, 0, 0.5), ParameterError);
}

TEST_CASE("participants ordered by time, unknown message rejected") {
    const auto log = make_log({{"u1", "m1", 5}, {"u2", "m1", 7}});
    const auto idx = build_cascade_index(log, 2, 0.5);
    const auto parts = idx.participants(0);
    REQUIRE(parts.size() == 2);
    CHECK(log.users.name(parts[0]) == "u1");
    CHECK(log.users.name(parts[1]) == "u2");
    CHECK_THROWS_AS(idx.participants(99), DataError);

    const auto single_log = make_log({{"x", "m", 3}});
    const auto single = build_cascade_index(single_log, 1, 0.5);
    CHECK(single.participants(0).size() == 1);
}

TEST_CASE("shuffled synthetic message matches the sort oracle") {
    Rng rng(99);
    std::vector<Rec> recs;
    std::vector<std::pair<Timestamp, std::size_t>> expected;  // (time, ingest position)
    for (std::size_t k = 0; k < 100; ++k) {
        const auto t = static_cast<Timestamp>(rng.next_below(50));  // many ties
        recs.push_back({"u" + std::to_string(k), "big", t});
        expected.emplace_back(t, k);
    }
    std::stable_sort(expected.begin(), expected.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    const auto log = make_log(recs);
    const auto idx = build_cascade_index(log, 10, 0.5);
    const auto parts = idx.participants(0);
    REQUIRE(parts.size() == 100);
    for (std::size_t k = 0; k < 100; ++k) {
        CHECK(log.users.name(parts[k]) == "u" + std::to_string(expected[k].second));
    }
}

TEST_CASE("recount property: key and viral flags match the definitional oracle") {
    Rng rng(2024);
    for (int trial = 0; trial < 15; ++trial) {
        const auto log = testsup::random_log(rng, 20, 12);
        const std::int64_t theta = 2 + static_cast<std::int64_t>(rng.next_below(5));
        const double phi = 0.25 + 0.1 * static_cast<double>(rng.next_below(6));
        const auto idx = build_cascade_index(log, theta, phi);
        const auto olog = oracle::from_action_log(log, theta, phi);
        for (MessageId m = 0; m < log.message_count(); ++m) {
            CHECK(idx.cascade(m).viral == oracle::is_viral(olog, m));
            for (const auto& p : idx.cascade(m).participants) {
                CHECK(p.key == oracle::is_key_user(olog, p.user, m));
            }
        }
        CHECK(idx.rho() == doctest::Approx(oracle::rho(olog)).epsilon(1e-15));
    }
}

TEST_CASE("rho boundary values") {
    const auto all_viral = build_cascade_index(make_log({{"a", "m", 1}, {"b", "m", 2}}), 2, 0.5);
    CHECK(all_viral.rho() == 1.0);
    const auto log = make_log({{"a", "m", 1}});
    const auto none_viral = build_cascade_index(log, 5, 0.5);
    CHECK(none_viral.rho() == 0.0);
}

TEST_CASE("ingestion is idempotent") {
    const auto dir = testsup::temp_dir("idem");
    testsup::write_file(dir + "/a.csv", "user_id,message_id,timestamp\nz,m,3\na,m,1\nb,n,2\n");
    const auto log1 = ingest_actions_file(dir + "/a.csv", std::nullopt);
    const auto log2 = ingest_actions_file(dir + "/a.csv", std::nullopt);
    CHECK(log1.fingerprint() == log2.fingerprint());
    CHECK(log1.users.names() == log2.users.names());
}

TEST_CASE("index container round trip") {
    const auto dir = testsup::temp_dir("index");
    const auto log = make_log({{"a", "m", 1}, {"b", "m", 2}, {"c", "n", 1}}, {"b"});
    const auto idx = build_cascade_index(log, 2, 0.5);
    save_index(dir + "/index.json", log, idx);
    const auto bundle = load_index(dir + "/index.json");
    CHECK(bundle.log.fingerprint() == log.fingerprint());
    CHECK(bundle.index.fingerprint() == idx.fingerprint());
    CHECK(bundle.index.rho() == idx.rho());
    CHECK(bundle.log.is_verified(*bundle.log.users.find("b")));
}

TEST_CASE("dedup property on random logs: minimum time survives") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<RawAction> recs;
        std::map<std::pair<std::string, std::string>, Timestamp> expected;
        const std::size_t n = 5 + rng.next_below(40);
        for (std::size_t k = 0; k < n; ++k) {
            RawAction a{"u" + std::to_string(rng.next_below(6)),
                        "m" + std::to_string(rng.next_below(4)),
                        static_cast<Timestamp>(rng.next_below(30))};
            auto key = std::make_pair(a.user, a.message);
            auto it = expected.find(key);
            if (it == expected.end() || a.time < it->second) expected[key] = a.time;
            recs.push_back(std::move(a));
        }
        const auto log = ingest_records(recs, {});
        CHECK(log.tuples.size() == expected.size());
        for (const auto& t : log.tuples) {
            CHECK(t.time == expected.at({log.users.name(t.user), log.messages.name(t.message)}));
        }
    }
}

}  // TEST_SUITE
