#include "psm/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "psm/bipartite.hpp"
#include "psm/causality.hpp"
#include "psm/eval.hpp"
#include "psm/features.hpp"
#include "psm/rng.hpp"
#include "psm/user_graph.hpp"
#include "psm/util.hpp"

namespace psm {

namespace fs = std::filesystem;
using nlohmann::json;

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<int>& labels, double second_fraction, std::uint64_t seed) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
    Rng rng(mix_seed(seed, 0x517a7));
    rng.shuffle(pos);
    rng.shuffle(neg);
    std::vector<std::size_t> first, second;
    for (auto* cls : {&pos, &neg}) {
        const auto n_second = static_cast<std::size_t>(
            std::llround(static_cast<double>(cls->size()) * second_fraction));
        for (std::size_t k = 0; k < cls->size(); ++k) {
            (k < n_second ? second : first).push_back((*cls)[k]);
        }
    }
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    return {first, second};
}

namespace {

struct StageLog {
    json stages = json::array();

    void record(const std::string& name, const std::string& input_fp, bool reused, double ms,
                std::vector<std::string> outputs) {
        json s;
        s["name"] = name;
        s["input_fingerprint"] = input_fp;
        s["reused"] = reused;
        s["wall_ms"] = ms;
        s["outputs"] = std::move(outputs);
        stages.push_back(std::move(s));
    }
};

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

bool fresh_artifact(const std::string& path, const std::string& kind, const std::string& input_fp,
                    bool force) {
    if (force) return false;
    if (!fs::exists(path)) return false;
    const auto meta = read_meta(path);
    return meta && meta->kind == kind && meta->input_fingerprint == input_fp;
}

void stamp(const std::string& path, const std::string& kind, const std::string& input_fp,
           const std::string& index_fp = "",
           std::map<std::string, std::string> params = {}) {
    ArtifactMeta meta;
    meta.kind = kind;
    meta.input_fingerprint = input_fp;
    meta.index_fingerprint = index_fp;
    meta.params = std::move(params);
    write_meta(path, meta);
}

json flagged_json(const Flagged& f) {
    json j;
    j["value"] = f.value;
    j["defined"] = f.defined;
    return j;
}

}  // namespace

PipelineConfig pipeline_config_from_json(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw DataError("invalid pipeline config JSON");
    PipelineConfig c;
    c.out_dir = j.value("out_dir", c.out_dir);
    c.seed = j.value("seed", c.seed);
    if (j.contains("synth") && !j["synth"].is_null()) {
        c.synth = synth_config_from_json(j["synth"].dump());
    }
    if (j.contains("actions")) c.actions_path = j["actions"].get<std::string>();
    if (j.contains("verified")) c.verified_path = j["verified"].get<std::string>();
    if (j.contains("labels")) c.labels_path = j["labels"].get<std::string>();
    c.strict_parse = j.value("strict", c.strict_parse);
    c.theta = j.value("theta", c.theta);
    c.phi = j.value("phi", c.phi);
    c.omega = j.value("omega", c.omega);
    c.rel_cap = j.value("rel_cap", c.rel_cap);
    if (j.contains("gamma") && !j["gamma"].is_null()) c.gamma = j["gamma"].get<double>();
    c.damping = j.value("damping", c.damping);
    c.pr_tol = j.value("pr_tol", c.pr_tol);
    c.pr_max_iter = j.value("pr_max_iter", c.pr_max_iter);
    c.select = j.value("select", c.select);
    c.model = j.value("model", c.model);
    if (j.contains("model_config")) c.model_config_json = j["model_config"].dump();
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.at_precision = j.value("at_precision", c.at_precision);
    if (j.contains("wset") && !j["wset"].is_null()) {
        const auto& w = j["wset"];
        WsetParams p;
        p.theta_pr = w.value("theta_pr", p.theta_pr);
        p.alpha = w.value("alpha", p.alpha);
        p.theta_tr = w.value("theta_tr", p.theta_tr);
        p.beta = w.value("beta", p.beta);
        p.min_selected = w.value("min_selected", p.min_selected);
        p.clamp_eps = w.value("clamp_eps", p.clamp_eps);
        p.inverted_weighting = w.value("inverted_weighting", p.inverted_weighting);
        p.dev_fraction = w.value("dev_fraction", p.dev_fraction);
        p.seed = c.seed;
        c.wset = p;
        c.wset_seed_per_class = w.value("seed_per_class", c.wset_seed_per_class);
        c.wset_supervised = w.value("supervised", c.wset_supervised);
    }
    return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open pipeline config " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return pipeline_config_from_json(text);
}

PipelineResult run_pipeline(const PipelineConfig& cfg, bool force) {
    fs::create_directories(cfg.out_dir);
    StageLog stages;

    std::string current_stage = "setup";
    try {
        // ----- inputs -----
        std::string actions_path, labels_path;
        std::optional<std::string> verified_path;
        if (cfg.synth) {
            current_stage = "synth";
            Timer t;
            const std::string dir = cfg.out_dir + "/synth";
            actions_path = dir + "/actions.csv";
            verified_path = dir + "/verified.txt";
            labels_path = dir + "/labels.csv";
            Fnv1a h;
            h.update("synth-v1");
            h.update(synth_config_to_json(*cfg.synth));
            const std::string fp = h.hex();
            const bool reuse = fresh_artifact(actions_path, "synth", fp, force) &&
                               fs::exists(*verified_path) && fs::exists(labels_path);
            if (!reuse) {
                write_synth_output(dir, generate_synthetic(*cfg.synth));
                stamp(actions_path, "synth", fp);
            }
            stages.record("synth", fp, reuse, t.ms(),
                          {actions_path, *verified_path, labels_path});
        } else {
            if (!cfg.actions_path) throw UsageError("pipeline needs either synth config or actions");
            actions_path = *cfg.actions_path;
            verified_path = cfg.verified_path;
            if (!cfg.labels_path) throw UsageError("pipeline requires a labels file");
            labels_path = *cfg.labels_path;
        }

        // ----- ingest (parse cache) -----
        current_stage = "ingest";
        ActionLog log;
        {
            Timer t;
            const std::string log_path = cfg.out_dir + "/log.json";
            Fnv1a h;
            h.update("ingest-v1");
            h.update_u64(fingerprint_file(actions_path));
            if (verified_path) h.update_u64(fingerprint_file(*verified_path));
            h.update(cfg.strict_parse ? "strict" : "lenient");
            const std::string fp = h.hex();
            const bool reuse = fresh_artifact(log_path, "log", fp, force);
            if (reuse) {
                log = load_log(log_path);
            } else {
                log = ingest_actions_file(actions_path, verified_path,
                                          cfg.strict_parse ? ParseMode::strict : ParseMode::lenient);
                save_log(log_path, log);
                stamp(log_path, "log", fp);
            }
            stages.record("ingest", fp, reuse, t.ms(), {log_path});
        }

        // ----- cascade index -----
        current_stage = "index";
        CascadeIndex index;
        {
            Timer t;
            const std::string index_path = cfg.out_dir + "/index.json";
            Fnv1a h;
            h.update("index-v1");
            h.update_u64(log.fingerprint());
            h.update_i64(cfg.theta);
            h.update_double(cfg.phi);
            const std::string fp = h.hex();
            const bool reuse = fresh_artifact(index_path, "index", fp, force);
            index = build_cascade_index(log, cfg.theta, cfg.phi);
            if (!reuse) {
                save_index(index_path, log, index);
                stamp(index_path, "index", fp, to_hex(index.fingerprint()));
            }
            stages.record("index", fp, reuse, t.ms(), {index_path});
        }
        const std::string index_fp = to_hex(index.fingerprint());

        // ----- causal metrics -----
        current_stage = "metrics-causal";
        Table causal_table;
        const std::string causal_path = cfg.out_dir + "/causal.csv";
        {
            Timer t;
            Fnv1a h;
            h.update("causal-v1");
            h.update_u64(index.fingerprint());
            h.update_double(cfg.omega);
            h.update_double(cfg.rel_cap);
            const std::string fp = h.hex();
            const bool reuse = fresh_artifact(causal_path, "causal", fp, force);
            if (reuse) {
                causal_table = read_table(causal_path);
            } else {
                CausalityParams params;
                params.omega = cfg.omega;
                params.rel_cap = cfg.rel_cap;
                causal_table = causality_table(log, index, compute_causality(index, params));
                write_table(causal_path, causal_table);
                stamp(causal_path, "causal", fp, index_fp,
                      {{"omega", format_double(cfg.omega)}});
            }
            stages.record("metrics-causal", fp, reuse, t.ms(), {causal_path});
        }

        // ----- bipartite metrics -----
        current_stage = "metrics-bipartite";
        Table bipartite_table;
        const std::string bipartite_path = cfg.out_dir + "/bipartite.csv";
        const std::string messages_path = cfg.out_dir + "/messages.csv";
        {
            Timer t;
            Fnv1a h;
            h.update("bipartite-v1");
            h.update_u64(index.fingerprint());
            h.update(cfg.gamma ? format_double(*cfg.gamma) : "auto");
            h.update_double(cfg.damping);
            h.update_double(cfg.pr_tol);
            h.update_i64(cfg.pr_max_iter);
            const std::string fp = h.hex();
            const bool reuse = fresh_artifact(bipartite_path, "bipartite", fp, force);
            if (reuse) {
                bipartite_table = read_table(bipartite_path);
            } else {
                const auto graph = build_bipartite_graph(log);
                PageRankParams pp;
                pp.damping = cfg.damping;
                pp.tol = cfg.pr_tol;
                pp.max_iter = cfg.pr_max_iter;
                const auto pr = pagerank(graph, pp);
                const double gamma = cfg.gamma ? *cfg.gamma : default_gamma(index);
                auto feats = bipartite_features(log, index, graph, pr, gamma);
                bipartite_table = std::move(feats.users);
                write_table(bipartite_path, bipartite_table);
                write_table(messages_path, feats.messages);
                stamp(bipartite_path, "bipartite", fp, index_fp,
                      {{"gamma", format_double(gamma)}});
                stamp(messages_path, "bipartite-messages", fp, index_fp);
            }
            stages.record("metrics-bipartite", fp, reuse, t.ms(),
                          {bipartite_path, messages_path});
        }

        // ----- user-graph metrics -----
        current_stage = "metrics-usergraph";
        Table usergraph_table;
        const std::string usergraph_path = cfg.out_dir + "/usergraph.csv";
        {
            Timer t;
            Fnv1a h;
            h.update("usergraph-v1");
            h.update_u64(index.fingerprint());
            const std::string fp = h.hex();
            const bool reuse = fresh_artifact(usergraph_path, "usergraph", fp, force);
            if (reuse) {
                usergraph_table = read_table(usergraph_path);
            } else {
                const auto graph = build_user_graph(index);
                const auto related = all_related_sets(index);
                usergraph_table = user_graph_features(log, index, graph, related).users;
                write_table(usergraph_path, usergraph_table);
                stamp(usergraph_path, "usergraph", fp, index_fp);
            }
            stages.record("metrics-usergraph", fp, reuse, t.ms(), {usergraph_path});
        }

        // ----- feature assembly -----
        current_stage = "features";
        const std::string features_path = cfg.out_dir + "/features.csv";
        FeatureMatrix matrix;
        {
            Timer t;
            Fnv1a h;
            h.update("features-v1");
            h.update_u64(index.fingerprint());
            h.update_u64(fingerprint_file(causal_path));
            h.update_u64(fingerprint_file(bipartite_path));
            h.update_u64(fingerprint_file(usergraph_path));
            const std::string fp = h.hex();
            const bool reuse = fresh_artifact(features_path, "feature_matrix", fp, force);
            matrix = assemble_tables(causal_table, bipartite_table, usergraph_table, index_fp,
                                     index_fp, index_fp);
            if (!reuse) {
                write_features(features_path, matrix);
                stamp(features_path, "feature_matrix", fp, index_fp);
            }
            stages.record("features", fp, reuse, t.ms(), {features_path});
        }

        const FeatureMatrix selected = select_columns(matrix, feature_selection(cfg.select));

        // ----- labels -----
        current_stage = "labels";
        const auto truth_list = read_labels_csv(labels_path);
        std::unordered_map<std::string, int> truth;
        for (const auto& l : truth_list) truth[l.user] = l.positive ? 1 : 0;

        std::vector<std::size_t> labeled_rows;
        std::vector<int> labeled_y;
        for (std::size_t r = 0; r < selected.table.size(); ++r) {
            auto it = truth.find(selected.table.keys[r]);
            if (it == truth.end()) continue;
            labeled_rows.push_back(r);
            labeled_y.push_back(it->second);
        }
        if (labeled_rows.empty()) throw DataError("no labeled users intersect the feature matrix");

        auto subtable = [&](const std::vector<std::size_t>& rows) {
            Table t;
            t.key_name = selected.table.key_name;
            t.columns = selected.table.columns;
            for (std::size_t r : rows) {
                t.keys.push_back(selected.table.keys[r]);
                t.rows.push_back(selected.table.rows[r]);
            }
            return t;
        };

        // ----- supervised train + eval -----
        current_stage = "train";
        json report;
        report["format_version"] = 1;
        report["tool_version"] = kToolVersion;
        report["model"] = cfg.model;
        report["select"] = cfg.select;
        report["seed"] = cfg.seed;
        report["theta"] = cfg.theta;
        report["phi"] = cfg.phi;
        {
            Timer t;
            const auto [train_pos, test_pos] =
                stratified_split(labeled_y, cfg.test_fraction, cfg.seed);
            std::vector<std::size_t> train_rows, test_rows;
            std::vector<int> train_y, test_y;
            for (auto k : train_pos) {
                train_rows.push_back(labeled_rows[k]);
                train_y.push_back(labeled_y[k]);
            }
            for (auto k : test_pos) {
                test_rows.push_back(labeled_rows[k]);
                test_y.push_back(labeled_y[k]);
            }
            const Table train_table = subtable(train_rows);
            const Table test_table = subtable(test_rows);
            const auto cw = balanced_class_weights(train_y);
            auto model = train_model(cfg.model, cfg.model_config_json, train_table, train_y, {},
                                     cw, cfg.seed);
            const std::string model_path = cfg.out_dir + "/model.bin";
            save_model(model_path, *model);

            const auto scores = model->predict_positive(test_table);
            std::vector<std::pair<std::string, double>> score_rows;
            for (std::size_t i = 0; i < scores.size(); ++i) {
                score_rows.emplace_back(test_table.keys[i], scores[i]);
            }
            write_scores_csv(cfg.out_dir + "/scores.csv", score_rows);

            const auto rep = classification_report(scores, test_y, 0.5);
            json sup;
            sup["train_size"] = train_rows.size();
            sup["test_size"] = test_rows.size();
            sup["auc"] = flagged_json(rep.auc);
            sup["precision"] = flagged_json(rep.precision);
            sup["recall"] = flagged_json(rep.recall);
            sup["f1"] = flagged_json(rep.f1);
            json rap;
            rap["target"] = cfg.at_precision;
            rap["recall"] = recall_at_precision(scores, test_y, cfg.at_precision);
            sup["recall_at_precision"] = rap;
            report["supervised"] = std::move(sup);
            stages.record("train-eval", "", false, t.ms(),
                          {model_path, cfg.out_dir + "/scores.csv"});
        }

        // ----- wset (optional) -----
        if (cfg.wset) {
            current_stage = "wset";
            Timer t;
            WsetParams params = *cfg.wset;
            params.seed = cfg.seed;

            std::vector<std::size_t> pos_rows, neg_rows;
            for (std::size_t k = 0; k < labeled_rows.size(); ++k) {
                (labeled_y[k] ? pos_rows : neg_rows).push_back(labeled_rows[k]);
            }
            Rng rng(mix_seed(cfg.seed, 0x3eed));
            rng.shuffle(pos_rows);
            rng.shuffle(neg_rows);
            if (pos_rows.size() < cfg.wset_seed_per_class ||
                neg_rows.size() < cfg.wset_seed_per_class) {
                throw DataError("not enough labeled users for the requested wset seed set");
            }
            WsetInput input;
            input.features = &selected.table;
            for (std::size_t k = 0; k < cfg.wset_seed_per_class; ++k) {
                input.seed_labels.push_back({selected.table.keys[pos_rows[k]], true});
                input.seed_labels.push_back({selected.table.keys[neg_rows[k]], false});
            }
            if (cfg.wset_supervised) input.oracle = &truth;

            TrainerFn trainer = [&](const Table& x, const std::vector<int>& y,
                                    const std::vector<double>& w, std::uint64_t seed) {
                return train_model(cfg.model, cfg.model_config_json, x, y, w,
                                   balanced_class_weights(y), seed);
            };
            const auto result = wset(input, params, trainer);
            write_pool_csv(cfg.out_dir + "/pool.csv", result.pool);
            write_audit_jsonl(cfg.out_dir + "/audit.jsonl", result);

            const auto curve = cumulative_selection_curve(result.audit, truth);
            json w;
            w["iterations"] = result.audit.size();
            w["termination"] = result.termination;
            w["baseline_accuracy"] = result.baseline_accuracy;
            w["supervised_oracle"] = cfg.wset_supervised;
            if (!curve.empty()) {
                const auto& last = curve.back();
                w["selected_pos"] = last.cum_pos_tp + last.cum_pos_fp;
                w["selected_pos_true"] = last.cum_pos_tp;
                w["selected_pos_precision"] =
                    last.cum_pos_tp + last.cum_pos_fp > 0
                        ? static_cast<double>(last.cum_pos_tp) /
                              static_cast<double>(last.cum_pos_tp + last.cum_pos_fp)
                        : 0.0;
                w["selected_neg"] = last.cum_neg_tn + last.cum_neg_fn;
                w["selected_neg_true"] = last.cum_neg_tn;
            } else {
                w["selected_pos"] = 0;
                w["selected_pos_true"] = 0;
                w["selected_pos_precision"] = 0.0;
                w["selected_neg"] = 0;
                w["selected_neg_true"] = 0;
            }
            report["wset"] = std::move(w);
            stages.record("wset", "", false, t.ms(),
                          {cfg.out_dir + "/pool.csv", cfg.out_dir + "/audit.jsonl"});
        } else {
            report["wset"] = nullptr;
        }

        current_stage = "report";
        json fps;
        fps["log"] = to_hex(log.fingerprint());
        fps["index"] = index_fp;
        fps["schema"] = to_hex(matrix.schema_fingerprint());
        report["fingerprints"] = std::move(fps);

        PipelineResult res;
        res.report_path = cfg.out_dir + "/report.json";
        res.manifest_path = cfg.out_dir + "/manifest.json";
        {
            std::ofstream out(res.report_path, std::ios::binary);
            if (!out) throw DataError("cannot write report.json");
            out << report.dump(2) << '\n';
        }
        {
            json manifest;
            manifest["tool_version"] = kToolVersion;
            manifest["seed"] = cfg.seed;
            manifest["stages"] = stages.stages;
            std::ofstream out(res.manifest_path, std::ios::binary);
            if (!out) throw DataError("cannot write manifest.json");
            out << manifest.dump(2) << '\n';
        }
        return res;
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        throw DataError("pipeline stage '" + current_stage + "' failed: " + e.what());
    }
}

}  // namespace psm
