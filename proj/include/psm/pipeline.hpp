#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "psm/synth.hpp"
#include "psm/wset.hpp"

namespace psm {

// End-to-end run configuration. Every CLI flag has a config counterpart;
// flags override the file.
struct PipelineConfig {
    std::string out_dir = "run";
    std::uint64_t seed = 42;

    // input: either a generator config or existing files
    std::optional<SynthConfig> synth;
    std::optional<std::string> actions_path;
    std::optional<std::string> verified_path;
    std::optional<std::string> labels_path;  // ground truth for training/eval
    bool strict_parse = false;

    std::int64_t theta = 100;
    double phi = 0.5;

    double omega = 1e-9;
    double rel_cap = 1e6;
    std::optional<double> gamma;  // unset: 1 / median cascade duration
    double damping = 0.85;
    double pr_tol = 1e-8;
    int pr_max_iter = 100;

    std::string select = "all";  // all | top10 | causal
    std::string model = "rf";
    std::string model_config_json;  // kind-specific overrides, may be empty
    double test_fraction = 0.3;
    double at_precision = 0.9;

    std::optional<WsetParams> wset;
    std::size_t wset_seed_per_class = 300;
    bool wset_supervised = false;
};

PipelineConfig pipeline_config_from_json(const std::string& json_text);
PipelineConfig load_pipeline_config(const std::string& path);

struct PipelineResult {
    std::string report_path;
    std::string manifest_path;
};

// Runs synth -> ingest -> index -> metrics -> features -> train/eval
// (-> wset). Artifacts are reused when their recorded input fingerprints
// match; `force` rebuilds everything. report.json is byte-deterministic for
// a fixed config and seed.
PipelineResult run_pipeline(const PipelineConfig& config, bool force = false);

// Seeded stratified split helper: returns (first, second) index sets where
// `second` receives round(fraction * n) per class.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<int>& labels, double second_fraction, std::uint64_t seed);

}  // namespace psm
