#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psm/action_log.hpp"
#include "psm/csv.hpp"

namespace psm {

// Planted-ground-truth cascade generator. PSM accounts are over-represented
// in the key-user prefix of viral cascades (the early slots that the
// key-user rule will flag); everything else is background noise.
struct SynthConfig {
    std::size_t n_users = 5000;
    double psm_fraction = 0.19;
    std::size_t n_messages = 800;
    double viral_fraction = 0.10;
    std::size_t viral_size_min = 100;
    std::size_t viral_size_max = 300;
    std::size_t nonviral_size_min = 5;
    std::size_t nonviral_size_max = 80;
    double psm_early_bias = 0.65;     // P(PSM | key-prefix slot of a viral cascade)
    double normal_early_bias = 0.12;  // P(PSM | any other slot)
    double verified_fraction = 0.05;  // sampled among normal users
    double key_fraction = 0.5;        // phi used to size the early prefix
    double inter_arrival_mean = 30.0; // seconds, exponential
    bool inject_ties = false;
    double tie_probability = 0.25;
    std::uint64_t seed = 42;
};

SynthConfig synth_config_from_json(const std::string& json_text);
std::string synth_config_to_json(const SynthConfig& config);
SynthConfig load_synth_config(const std::string& path);

struct SynthOutput {
    std::vector<RawAction> actions;
    std::vector<LabeledUser> labels;  // covers every generated user
    std::vector<std::string> verified;
    SynthConfig config;
};

SynthOutput generate_synthetic(const SynthConfig& config);

// Writes actions.csv, labels.csv, verified.txt and config-echo.json.
void write_synth_output(const std::string& dir, const SynthOutput& out);

}  // namespace psm
