#include "psm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "psm/rng.hpp"
#include "psm/util.hpp"

namespace psm {

using nlohmann::json;

namespace {

void validate(const SynthConfig& c) {
    auto frac = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (c.n_users == 0 || c.n_messages == 0) throw ParameterError("n_users/n_messages must be >= 1");
    if (!frac(c.psm_fraction) || !frac(c.viral_fraction) || !frac(c.psm_early_bias) ||
        !frac(c.normal_early_bias) || !frac(c.verified_fraction) || !frac(c.tie_probability)) {
        throw ParameterError("synth fractions must lie in [0,1]");
    }
    if (!(c.key_fraction > 0.0 && c.key_fraction < 1.0)) {
        throw ParameterError("key_fraction must lie in (0,1)");
    }
    if (c.viral_size_min < 1 || c.nonviral_size_min < 1 || c.viral_size_max < c.viral_size_min ||
        c.nonviral_size_max < c.nonviral_size_min) {
        throw ParameterError("cascade size ranges invalid");
    }
    if (c.viral_size_max > c.n_users || c.nonviral_size_max > c.n_users) {
        throw ParameterError("infeasible config: cascade size exceeds n_users");
    }
    if (c.psm_fraction > 0.0 && !(c.psm_early_bias > c.normal_early_bias)) {
        throw ParameterError("psm_early_bias must exceed normal_early_bias");
    }
    if (c.inter_arrival_mean <= 0.0) throw ParameterError("inter_arrival_mean must be positive");
}

std::string user_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "u%06zu", i);
    return buf;
}

std::string message_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "m%06zu", i);
    return buf;
}

}  // namespace

SynthOutput generate_synthetic(const SynthConfig& config) {
    validate(config);
    SynthOutput out;
    out.config = config;
    Rng rng(config.seed);

    const std::size_t n = config.n_users;
    const auto n_psm = static_cast<std::size_t>(std::floor(static_cast<double>(n) * config.psm_fraction));
    std::vector<std::uint32_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::uint32_t>(i);
    rng.shuffle(perm);

    std::vector<bool> is_psm(n, false);
    std::vector<std::uint32_t> psm_pool, normal_pool;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_psm) is_psm[perm[i]] = true;
    }
    for (std::uint32_t u = 0; u < n; ++u) (is_psm[u] ? psm_pool : normal_pool).push_back(u);

    out.labels.reserve(n);
    for (std::size_t u = 0; u < n; ++u) out.labels.push_back({user_name(u), is_psm[u]});

    // verified accounts drawn from the normal users
    std::vector<std::uint32_t> normal_shuffled = normal_pool;
    rng.shuffle(normal_shuffled);
    const auto n_verified = std::min<std::size_t>(
        normal_shuffled.size(),
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * config.verified_fraction)));
    std::vector<std::uint32_t> verified_ids(normal_shuffled.begin(),
                                            normal_shuffled.begin() +
                                                static_cast<std::ptrdiff_t>(n_verified));
    std::sort(verified_ids.begin(), verified_ids.end());
    for (auto u : verified_ids) out.verified.push_back(user_name(u));

    std::vector<std::uint8_t> used(n, 0);
    std::vector<std::uint32_t> touched;
    for (std::size_t m = 0; m < config.n_messages; ++m) {
        const bool viral = rng.chance(config.viral_fraction);
        const std::size_t lo = viral ? config.viral_size_min : config.nonviral_size_min;
        const std::size_t hi = viral ? config.viral_size_max : config.nonviral_size_max;
        const std::size_t size = lo + static_cast<std::size_t>(rng.next_below(hi - lo + 1));

        // slots whose strictly-later count still satisfies the key rule
        std::size_t prefix_len = 0;
        for (std::size_t r = 0; r < size; ++r) {
            if (static_cast<double>(size) * config.key_fraction <=
                static_cast<double>(size - 1 - r)) {
                ++prefix_len;
            } else {
                break;
            }
        }

        touched.clear();
        std::size_t used_psm = 0, used_normal = 0;
        Timestamp t = static_cast<Timestamp>(rng.next_below(1000000));
        const std::string msg = message_name(m);
        for (std::size_t r = 0; r < size; ++r) {
            const bool early = viral && r < prefix_len;
            const double psm_p = early ? config.psm_early_bias : config.normal_early_bias;
            const bool want_psm = rng.chance(psm_p);
            std::uint32_t user = UINT32_MAX;
            for (const bool from_psm : {want_psm, !want_psm}) {
                const auto& p = from_psm ? psm_pool : normal_pool;
                const std::size_t taken = from_psm ? used_psm : used_normal;
                if (taken >= p.size()) continue;
                while (true) {
                    const auto cand = p[rng.next_below(p.size())];
                    if (!used[cand]) {
                        user = cand;
                        break;
                    }
                }
                (from_psm ? used_psm : used_normal) += 1;
                break;
            }
            if (user == UINT32_MAX) throw ParameterError("infeasible config: ran out of users");
            used[user] = 1;
            touched.push_back(user);

            out.actions.push_back({user_name(user), msg, t});
            Timestamp step =
                static_cast<Timestamp>(std::llround(rng.next_exponential(config.inter_arrival_mean)));
            if (step < 1) step = 1;
            if (config.inject_ties && rng.chance(config.tie_probability)) step = 0;
            t += step;
        }
        for (auto u : touched) used[u] = 0;
    }
    return out;
}

SynthConfig synth_config_from_json(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw DataError("invalid synth config JSON");
    SynthConfig c;
    c.n_users = j.value("n_users", c.n_users);
    c.psm_fraction = j.value("psm_fraction", c.psm_fraction);
    c.n_messages = j.value("n_messages", c.n_messages);
    c.viral_fraction = j.value("viral_fraction", c.viral_fraction);
    c.viral_size_min = j.value("viral_size_min", c.viral_size_min);
    c.viral_size_max = j.value("viral_size_max", c.viral_size_max);
    c.nonviral_size_min = j.value("nonviral_size_min", c.nonviral_size_min);
    c.nonviral_size_max = j.value("nonviral_size_max", c.nonviral_size_max);
    c.psm_early_bias = j.value("psm_early_bias", c.psm_early_bias);
    c.normal_early_bias = j.value("normal_early_bias", c.normal_early_bias);
    c.verified_fraction = j.value("verified_fraction", c.verified_fraction);
    c.key_fraction = j.value("key_fraction", c.key_fraction);
    c.inter_arrival_mean = j.value("inter_arrival_mean", c.inter_arrival_mean);
    c.inject_ties = j.value("inject_ties", c.inject_ties);
    c.tie_probability = j.value("tie_probability", c.tie_probability);
    c.seed = j.value("seed", c.seed);
    return c;
}

std::string synth_config_to_json(const SynthConfig& c) {
    json j;
    j["n_users"] = c.n_users;
    j["psm_fraction"] = c.psm_fraction;
    j["n_messages"] = c.n_messages;
    j["viral_fraction"] = c.viral_fraction;
    j["viral_size_min"] = c.viral_size_min;
    j["viral_size_max"] = c.viral_size_max;
    j["nonviral_size_min"] = c.nonviral_size_min;
    j["nonviral_size_max"] = c.nonviral_size_max;
    j["psm_early_bias"] = c.psm_early_bias;
    j["normal_early_bias"] = c.normal_early_bias;
    j["verified_fraction"] = c.verified_fraction;
    j["key_fraction"] = c.key_fraction;
    j["inter_arrival_mean"] = c.inter_arrival_mean;
    j["inject_ties"] = c.inject_ties;
    j["tie_probability"] = c.tie_probability;
    j["seed"] = c.seed;
    return j.dump(2);
}

SynthConfig load_synth_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open synth config " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return synth_config_from_json(text);
}

void write_synth_output(const std::string& dir, const SynthOutput& out) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir + "/actions.csv", std::ios::binary);
        if (!f) throw DataError("cannot write actions.csv");
        f << "user_id,message_id,timestamp\n";
        for (const auto& a : out.actions) {
            f << a.user << ',' << a.message << ',' << a.time << '\n';
        }
    }
    write_labels_csv(dir + "/labels.csv", out.labels);
    {
        std::ofstream f(dir + "/verified.txt", std::ios::binary);
        if (!f) throw DataError("cannot write verified.txt");
        for (const auto& v : out.verified) f << v << '\n';
    }
    {
        std::ofstream f(dir + "/config-echo.json", std::ios::binary);
        if (!f) throw DataError("cannot write config-echo.json");
        f << synth_config_to_json(out.config) << '\n';
    }
}

}  // namespace psm
