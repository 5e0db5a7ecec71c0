#include <doctest.h>

#include <filesystem>

#include <json.hpp>

#include "psm/cascade_index.hpp"
#include "psm/pipeline.hpp"
#include "test_support.hpp"

using namespace psm;
using nlohmann::json;

namespace {

PipelineConfig tiny_config(const std::string& out_dir) {
    SynthConfig s;
    s.n_users = 150;
    s.psm_fraction = 0.2;
    s.n_messages = 50;
    s.viral_fraction = 0.2;
    s.viral_size_min = 20;
    s.viral_size_max = 30;
    s.nonviral_size_min = 3;
    s.nonviral_size_max = 8;
    s.psm_early_bias = 0.7;
    s.normal_early_bias = 0.1;
    s.seed = 4;

    PipelineConfig c;
    c.out_dir = out_dir;
    c.seed = 10;
    c.synth = s;
    c.theta = 20;
    c.model = "rf";
    c.model_config_json = R"({"n_trees": 30})";
    return c;
}

json stage_map(const std::string& manifest_path) {
    json m = json::parse(testsup::read_file(manifest_path));
    json out = json::object();
    for (const auto& s : m["stages"]) out[s["name"].get<std::string>()] = s["reused"];
    return out;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("end-to-end run produces a report with an AUC field") {
    const auto dir = testsup::temp_dir("pipe");
    const auto cfg = tiny_config(dir + "/run");
    const auto res = run_pipeline(cfg);
    const json report = json::parse(testsup::read_file(res.report_path));
    CHECK(report["supervised"]["auc"]["defined"].get<bool>());
    CHECK(report["supervised"]["auc"]["value"].get<double>() > 0.5);
    CHECK(report.contains("fingerprints"));
    CHECK(std::filesystem::exists(dir + "/run/features.csv"));
    CHECK(std::filesystem::exists(dir + "/run/model.bin"));

    SUBCASE("feature rows equal the key-user count of the index") {
        const auto bundle = load_index(dir + "/run/index.json");
        const auto features = read_table(dir + "/run/features.csv");
        CHECK(features.size() == bundle.index.key_users().size());
    }
}

TEST_CASE("identical config and seed give byte-identical reports") {
    const auto dir = testsup::temp_dir("det");
    auto c1 = tiny_config(dir + "/a");
    auto c2 = tiny_config(dir + "/b");
    const auto r1 = run_pipeline(c1);
    const auto r2 = run_pipeline(c2);
    CHECK(testsup::read_file(r1.report_path) == testsup::read_file(r2.report_path));

    // rerun in place is also byte-identical
    const auto r3 = run_pipeline(c1);
    CHECK(testsup::read_file(r3.report_path) == testsup::read_file(r2.report_path));
}

TEST_CASE("rerun reuses fingerprinted stages; a theta change rebuilds the index chain") {
    const auto dir = testsup::temp_dir("reuse");
    auto cfg = tiny_config(dir + "/run");
    run_pipeline(cfg);
    run_pipeline(cfg);
    auto reused = stage_map(dir + "/run/manifest.json");
    CHECK(reused["synth"].get<bool>());
    CHECK(reused["ingest"].get<bool>());
    CHECK(reused["index"].get<bool>());
    CHECK(reused["metrics-causal"].get<bool>());
    CHECK(reused["metrics-bipartite"].get<bool>());
    CHECK(reused["metrics-usergraph"].get<bool>());
    CHECK(reused["features"].get<bool>());

    cfg.theta = 19;  // same content boundary is irrelevant; the index must rebuild
    run_pipeline(cfg);
    reused = stage_map(dir + "/run/manifest.json");
    CHECK(reused["ingest"].get<bool>());        // parse cache still valid
    CHECK_FALSE(reused["index"].get<bool>());   // depends on theta
    CHECK_FALSE(reused["metrics-causal"].get<bool>());
    CHECK_FALSE(reused["features"].get<bool>());

    SUBCASE("force rebuilds everything") {
        run_pipeline(cfg, /*force=*/true);
        const auto forced = stage_map(dir + "/run/manifest.json");
        for (const auto& [name, was_reused] : forced.items()) {
            CHECK_FALSE(was_reused.get<bool>());
        }
    }
}

TEST_CASE("pipeline with wset section reports selection totals") {
    const auto dir = testsup::temp_dir("pipewset");
    auto cfg = tiny_config(dir + "/run");
    WsetParams w;
    w.theta_pr = 1.0;
    w.alpha = 0.1;
    w.theta_tr = 0.05;
    cfg.wset = w;
    cfg.wset_seed_per_class = 15;
    const auto res = run_pipeline(cfg);
    const json report = json::parse(testsup::read_file(res.report_path));
    REQUIRE(!report["wset"].is_null());
    CHECK(report["wset"]["iterations"].get<int>() >= 1);
    CHECK(std::filesystem::exists(dir + "/run/pool.csv"));
    CHECK(std::filesystem::exists(dir + "/run/audit.jsonl"));
}

TEST_CASE("config file parsing with overrides") {
    const std::string text = R"({
        "out_dir": "somewhere",
        "seed": 77,
        "synth": {"n_users": 99, "psm_fraction": 0.1},
        "theta": 42,
        "phi": 0.4,
        "model": "dnn",
        "model_config": {"epochs": 2},
        "select": "top10",
        "wset": {"theta_pr": 0.9, "alpha": 0.01, "seed_per_class": 12, "supervised": true}
    })";
    const auto cfg = pipeline_config_from_json(text);
    CHECK(cfg.out_dir == "somewhere");
    CHECK(cfg.seed == 77);
    REQUIRE(cfg.synth);
    CHECK(cfg.synth->n_users == 99);
    CHECK(cfg.theta == 42);
    CHECK(cfg.phi == 0.4);
    CHECK(cfg.model == "dnn");
    CHECK(cfg.select == "top10");
    REQUIRE(cfg.wset);
    CHECK(cfg.wset->theta_pr == 0.9);
    CHECK(cfg.wset->alpha == 0.01);
    CHECK(cfg.wset_seed_per_class == 12);
    CHECK(cfg.wset_supervised);
    CHECK_THROWS_AS(pipeline_config_from_json("[]"), DataError);
}

TEST_CASE("missing inputs abort with the failing stage named") {
    PipelineConfig cfg;
    cfg.out_dir = testsup::temp_dir("bad") + "/run";
    CHECK_THROWS_AS(run_pipeline(cfg), UsageError);  // neither synth nor actions

    cfg.actions_path = "/nonexistent/actions.csv";
    cfg.labels_path = "/nonexistent/labels.csv";
    CHECK_THROWS_WITH_AS(run_pipeline(cfg),
                         doctest::Contains("pipeline stage 'ingest' failed"), DataError);
}

TEST_CASE("stratified split is seeded and proportional") {
    std::vector<int> labels;
    for (int k = 0; k < 100; ++k) labels.push_back(k < 40 ? 1 : 0);
    const auto [tr1, te1] = stratified_split(labels, 0.3, 5);
    const auto [tr2, te2] = stratified_split(labels, 0.3, 5);
    CHECK(tr1 == tr2);
    CHECK(te1 == te2);
    CHECK(te1.size() == 30);  // 12 positives + 18 negatives
    std::size_t pos = 0;
    for (auto k : te1) pos += static_cast<std::size_t>(labels[k]);
    CHECK(pos == 12);
    const auto [tr3, te3] = stratified_split(labels, 0.3, 6);
    CHECK(te3 != te1);
}

}  // TEST_SUITE
