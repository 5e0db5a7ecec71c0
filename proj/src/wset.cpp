#include "psm/wset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_set>

#include <json.hpp>

#include "psm/rng.hpp"
#include "psm/util.hpp"

namespace psm {

using nlohmann::json;

std::optional<double> find_precision_threshold(std::vector<ScoredDevRow> dev, double target) {
    if (dev.empty()) throw DataError("empty development set");
    std::sort(dev.begin(), dev.end(),
              [](const ScoredDevRow& a, const ScoredDevRow& b) { return a.confidence > b.confidence; });
    std::optional<double> best;
    std::size_t tp = 0, total = 0;
    std::size_t i = 0;
    while (i < dev.size()) {
        const double conf = dev[i].confidence;
        while (i < dev.size() && dev[i].confidence == conf) {
            ++total;
            if (dev[i].is_label) ++tp;
            ++i;
        }
        const double precision = static_cast<double>(tp) / static_cast<double>(total);
        if (precision >= target) best = conf;  // descending scan: last hit is the smallest
    }
    return best;
}

double decay_weight(double p, int it, double beta, double clamp_eps) {
    if (it < 1) throw ParameterError("iteration must be >= 1");
    if (beta < 0.0) throw ParameterError("beta must be >= 0");
    const double pc = std::min(p, 1.0 - clamp_eps);
    const double w = std::exp(-beta * static_cast<double>(it) * (1.0 / (1.0 - pc)));
    return std::max(w, std::numeric_limits<double>::min());
}

namespace {

double inverted_weight(double p, int it, double beta, double clamp_eps) {
    const double pc = std::min(p, 1.0 - clamp_eps);
    const double w = std::exp(-beta * static_cast<double>(it) * (1.0 - pc));
    return std::max(w, std::numeric_limits<double>::min());
}

Table subtable(const Table& t, const std::vector<std::size_t>& rows) {
    Table out;
    out.key_name = t.key_name;
    out.columns = t.columns;
    out.keys.reserve(rows.size());
    out.rows.reserve(rows.size());
    for (std::size_t r : rows) {
        out.keys.push_back(t.keys[r]);
        out.rows.push_back(t.rows[r]);
    }
    return out;
}

double dev_accuracy(const std::vector<double>& conf_pos, const std::vector<int>& labels) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int pred = conf_pos[i] >= 0.5 ? 1 : 0;
        if (pred == labels[i]) ++correct;
    }
    return labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace

UpdResult updwset(SelfTrainState& state, const Table& features,
                  const std::vector<double>& unlabeled_conf_pos,
                  const std::vector<double>& dev_conf_pos, const std::vector<int>& dev_labels,
                  const WsetParams& params) {
    UpdResult res;
    const double target = params.theta_pr - params.alpha * static_cast<double>(state.it - 1);

    std::vector<ScoredDevRow> dev_pos(dev_labels.size()), dev_neg(dev_labels.size());
    for (std::size_t i = 0; i < dev_labels.size(); ++i) {
        dev_pos[i] = {dev_conf_pos[i], dev_labels[i] == 1};
        dev_neg[i] = {1.0 - dev_conf_pos[i], dev_labels[i] == 0};
    }
    res.thr_pos = find_precision_threshold(dev_pos, target);
    res.thr_neg = find_precision_threshold(dev_neg, target);

    std::vector<std::size_t> keep;  // positions within unlabeled_rows
    keep.reserve(state.unlabeled_rows.size());
    for (std::size_t k = 0; k < state.unlabeled_rows.size(); ++k) {
        const double cp = unlabeled_conf_pos[k];
        int label = -1;
        double conf = 0.0;
        if (res.thr_pos && cp >= *res.thr_pos) {
            label = 1;  // rows passing both thresholds count as positives
            conf = cp;
        } else if (res.thr_neg && (1.0 - cp) >= *res.thr_neg) {
            label = 0;
            conf = 1.0 - cp;
        }
        if (label < 0) {
            keep.push_back(k);
            continue;
        }
        const double w = params.inverted_weighting
                             ? inverted_weight(conf, state.it, params.beta, params.clamp_eps)
                             : decay_weight(conf, state.it, params.beta, params.clamp_eps);
        const std::size_t row = state.unlabeled_rows[k];
        state.train_rows.push_back(row);
        state.train_labels.push_back(label);
        state.train_weights.push_back(w);
        state.train_source.emplace_back("pseudo");
        state.train_iteration.push_back(state.it);
        res.selected.push_back({features.keys[row], label, conf, w, false});
        (label == 1 ? res.n_pos : res.n_neg) += 1;
    }
    std::vector<std::size_t> remaining;
    remaining.reserve(keep.size());
    for (std::size_t k : keep) remaining.push_back(state.unlabeled_rows[k]);
    state.unlabeled_rows.swap(remaining);
    return res;
}

WsetResult wset(const WsetInput& input, const WsetParams& params, const TrainerFn& trainer) {
    if (!input.features) throw UsageError("wset requires a feature table");
    if (params.theta_pr < 0.0 || params.alpha < 0.0 || params.theta_tr < 0.0) {
        throw ParameterError("wset thresholds must be non-negative");
    }
    const Table& features = *input.features;

    std::unordered_map<std::string, std::size_t> row_of;
    row_of.reserve(features.size());
    for (std::size_t r = 0; r < features.size(); ++r) row_of.emplace(features.keys[r], r);

    // L resolved to rows; unlabeled pool is everything else.
    std::vector<std::pair<std::size_t, int>> labeled;
    std::unordered_set<std::size_t> labeled_rows;
    for (const auto& lu : input.seed_labels) {
        auto it = row_of.find(lu.user);
        if (it == row_of.end()) {
            throw DataError("seed-labeled user missing from feature matrix: " + lu.user);
        }
        if (!labeled_rows.insert(it->second).second) {
            throw DataError("duplicate seed label for user " + lu.user);
        }
        labeled.emplace_back(it->second, lu.positive ? 1 : 0);
    }
    if (labeled.empty()) throw DataError("no seed labels");

    SelfTrainState state;
    if (input.explicit_dev) {
        std::unordered_set<std::string> devset(input.explicit_dev->begin(),
                                               input.explicit_dev->end());
        for (const auto& [row, label] : labeled) {
            if (devset.count(features.keys[row])) {
                state.dev_rows.push_back(row);
                state.dev_labels.push_back(label);
            } else {
                state.train_rows.push_back(row);
                state.train_labels.push_back(label);
            }
        }
    } else {
        // stratified split, seeded
        std::vector<std::size_t> pos_idx, neg_idx;
        for (std::size_t k = 0; k < labeled.size(); ++k) {
            (labeled[k].second == 1 ? pos_idx : neg_idx).push_back(k);
        }
        Rng rng(mix_seed(params.seed, 0x5e7));
        rng.shuffle(pos_idx);
        rng.shuffle(neg_idx);
        for (const auto* cls : {&pos_idx, &neg_idx}) {
            const auto n_dev = static_cast<std::size_t>(
                std::llround(static_cast<double>(cls->size()) * params.dev_fraction));
            for (std::size_t k = 0; k < cls->size(); ++k) {
                const auto& [row, label] = labeled[(*cls)[k]];
                if (k < n_dev) {
                    state.dev_rows.push_back(row);
                    state.dev_labels.push_back(label);
                } else {
                    state.train_rows.push_back(row);
                    state.train_labels.push_back(label);
                }
            }
        }
    }
    const bool dev_pos = std::count(state.dev_labels.begin(), state.dev_labels.end(), 1) > 0;
    const bool dev_neg = std::count(state.dev_labels.begin(), state.dev_labels.end(), 0) > 0;
    const bool tr_pos = std::count(state.train_labels.begin(), state.train_labels.end(), 1) > 0;
    const bool tr_neg = std::count(state.train_labels.begin(), state.train_labels.end(), 0) > 0;
    if (!dev_pos || !dev_neg || !tr_pos || !tr_neg) {
        throw DataError("training/development split is missing a class");
    }

    state.train_weights.assign(state.train_rows.size(), 1.0);
    state.train_source.assign(state.train_rows.size(), "seed");
    state.train_iteration.assign(state.train_rows.size(), 0);
    for (std::size_t r = 0; r < features.size(); ++r) {
        if (!labeled_rows.count(r)) state.unlabeled_rows.push_back(r);
    }

    const Table dev_table = subtable(features, state.dev_rows);
    auto model = trainer(subtable(features, state.train_rows), state.train_labels,
                         state.train_weights, mix_seed(params.seed, 0));
    std::vector<double> dev_conf = model->predict_positive(dev_table);
    const double c = dev_accuracy(dev_conf, state.dev_labels);
    double c_prime = c;

    WsetResult result;
    result.baseline_accuracy = c;
    result.termination = "dev_accuracy_drop";

    while (c_prime >= c - params.theta_tr) {
        const Table u_table = subtable(features, state.unlabeled_rows);
        const std::vector<double> u_conf =
            state.unlabeled_rows.empty() ? std::vector<double>{} : model->predict_positive(u_table);

        IterationAudit audit;
        audit.it = state.it;
        audit.target_precision = params.theta_pr - params.alpha * static_cast<double>(state.it - 1);
        audit.c = c;

        UpdResult upd = updwset(state, features, u_conf, dev_conf, state.dev_labels, params);

        if (input.oracle) {
            // the supervisor reviews this iteration's positive selections;
            // disagreements enter the pool with the true label at weight 1
            const std::size_t first_new = state.train_rows.size() - upd.selected.size();
            for (std::size_t k = 0; k < upd.selected.size(); ++k) {
                auto& rec = upd.selected[k];
                if (rec.label != 1) continue;
                auto it = input.oracle->find(rec.user);
                if (it == input.oracle->end()) {
                    if (params.oracle_abort_on_missing) {
                        throw DataError("oracle has no label for user " + rec.user);
                    }
                    continue;
                }
                if (it->second != rec.label) {
                    rec.label = it->second;
                    rec.weight = 1.0;
                    rec.corrected = true;
                    state.train_labels[first_new + k] = it->second;
                    state.train_weights[first_new + k] = 1.0;
                    state.train_source[first_new + k] = "corrected";
                }
            }
        }

        audit.thr_pos = upd.thr_pos;
        audit.thr_neg = upd.thr_neg;
        audit.n_pos = upd.n_pos;
        audit.n_neg = upd.n_neg;
        audit.selected = upd.selected;
        audit.pool_labeled = state.train_rows.size();
        audit.pool_unlabeled = state.unlabeled_rows.size();

        if (upd.selected.size() < params.min_selected) {
            audit.c_prime = c_prime;
            result.audit.push_back(std::move(audit));
            result.termination = "min_selected";
            break;
        }

        model = trainer(subtable(features, state.train_rows), state.train_labels,
                        state.train_weights, mix_seed(params.seed, static_cast<std::uint64_t>(state.it)));
        dev_conf = model->predict_positive(dev_table);
        c_prime = dev_accuracy(dev_conf, state.dev_labels);
        audit.c_prime = c_prime;
        audit.retrained = true;
        result.audit.push_back(std::move(audit));
        state.it += 1;
    }

    result.pool.reserve(state.train_rows.size());
    for (std::size_t k = 0; k < state.train_rows.size(); ++k) {
        result.pool.push_back({features.keys[state.train_rows[k]], state.train_labels[k],
                               state.train_weights[k], state.train_source[k],
                               state.train_iteration[k]});
    }
    return result;
}

void write_pool_csv(const std::string& path, const std::vector<WsetResult::PoolEntry>& pool) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "user_id,label,weight,source,iteration\n";
    for (const auto& p : pool) {
        out << p.user << ',' << (p.label ? "psm" : "normal") << ',' << format_double(p.weight)
            << ',' << p.source << ',' << p.iteration << '\n';
    }
}

void write_audit_jsonl(const std::string& path, const WsetResult& result) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    for (const auto& a : result.audit) {
        json j;
        j["it"] = a.it;
        j["target_precision"] = a.target_precision;
        if (a.thr_pos) j["thr_pos"] = *a.thr_pos; else j["thr_pos"] = nullptr;
        if (a.thr_neg) j["thr_neg"] = *a.thr_neg; else j["thr_neg"] = nullptr;
        j["n_pos"] = a.n_pos;
        j["n_neg"] = a.n_neg;
        j["c"] = a.c;
        j["c_prime"] = a.c_prime;
        j["retrained"] = a.retrained;
        j["pool_labeled"] = a.pool_labeled;
        j["pool_unlabeled"] = a.pool_unlabeled;
        json sel = json::array();
        for (const auto& s : a.selected) {
            sel.push_back({{"user", s.user},
                           {"label", s.label ? "psm" : "normal"},
                           {"confidence", s.confidence},
                           {"weight", s.weight},
                           {"corrected", s.corrected}});
        }
        j["selected"] = std::move(sel);
        out << j.dump() << '\n';
    }
}

std::vector<IterationAudit> read_audit_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open audit " + path);
    std::vector<IterationAudit> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw DataError(path + ":" + format_int(static_cast<std::int64_t>(line_no)) +
                            ": invalid audit record");
        }
        IterationAudit a;
        a.it = j.at("it").get<int>();
        a.target_precision = j.at("target_precision").get<double>();
        if (!j.at("thr_pos").is_null()) a.thr_pos = j.at("thr_pos").get<double>();
        if (!j.at("thr_neg").is_null()) a.thr_neg = j.at("thr_neg").get<double>();
        a.n_pos = j.at("n_pos").get<std::size_t>();
        a.n_neg = j.at("n_neg").get<std::size_t>();
        a.c = j.at("c").get<double>();
        a.c_prime = j.at("c_prime").get<double>();
        a.retrained = j.value("retrained", false);
        a.pool_labeled = j.value("pool_labeled", std::size_t{0});
        a.pool_unlabeled = j.value("pool_unlabeled", std::size_t{0});
        for (const auto& s : j.at("selected")) {
            SelectionRecord rec;
            rec.user = s.at("user").get<std::string>();
            rec.label = s.at("label").get<std::string>() == "psm" ? 1 : 0;
            rec.confidence = s.at("confidence").get<double>();
            rec.weight = s.at("weight").get<double>();
            rec.corrected = s.value("corrected", false);
            a.selected.push_back(std::move(rec));
        }
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace psm
