#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "psm/bipartite.hpp"
#include "psm/causality.hpp"
#include "psm/eval.hpp"
#include "psm/features.hpp"
#include "psm/pipeline.hpp"
#include "psm/synth.hpp"
#include "psm/user_graph.hpp"
#include "psm/util.hpp"
#include "psm/wset.hpp"

namespace {

using psm::Table;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

std::vector<int> labels_for(const Table& features, const std::vector<psm::LabeledUser>& labels,
                            std::vector<std::size_t>& rows) {
    std::unordered_map<std::string, int> truth;
    for (const auto& l : labels) truth[l.user] = l.positive ? 1 : 0;
    std::vector<int> y;
    for (std::size_t r = 0; r < features.size(); ++r) {
        auto it = truth.find(features.keys[r]);
        if (it == truth.end()) continue;
        rows.push_back(r);
        y.push_back(it->second);
    }
    if (y.empty()) throw psm::DataError("labels cover no user of the feature matrix");
    return y;
}

Table subtable(const Table& t, const std::vector<std::size_t>& rows) {
    Table out;
    out.key_name = t.key_name;
    out.columns = t.columns;
    for (std::size_t r : rows) {
        out.keys.push_back(t.keys[r]);
        out.rows.push_back(t.rows[r]);
    }
    return out;
}

json flagged_json(const psm::Flagged& f) {
    return json{{"value", f.value}, {"defined", f.defined}};
}

int run(int argc, char** argv) {
    CLI::App app{"psmkit: pathogenic-account detection from re/tweet cascades"};
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "cap worker threads (0 = hardware)");

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a planted-ground-truth action log");
    std::string synth_config_path, synth_out_dir = "synth";
    std::optional<std::uint64_t> synth_seed;
    synth->add_option("--config", synth_config_path, "synth config JSON");
    synth->add_option("--out-dir", synth_out_dir, "output directory")->required();
    synth->add_option("--seed", synth_seed, "override config seed");

    // ---- ingest ----
    auto* ingest = app.add_subcommand("ingest", "parse and index an action log");
    std::string ing_actions, ing_out;
    std::optional<std::string> ing_verified;
    std::int64_t ing_theta = 100;
    double ing_phi = 0.5;
    bool ing_strict = false;
    std::string ing_format = "auto";
    ingest->add_option("--actions", ing_actions, "actions file (CSV or JSON-lines)")->required();
    ingest->add_option("--verified", ing_verified, "verified users file (one id per line)");
    ingest->add_option("--theta", ing_theta, "viral threshold (participants)");
    ingest->add_option("--phi", ing_phi, "key-user fraction in (0,1)");
    ingest->add_flag("--strict", ing_strict, "abort on malformed records");
    ingest->add_option("--format", ing_format, "auto|csv|jsonl");
    ingest->add_option("--out", ing_out, "index output path")->required();

    // ---- metrics ----
    auto* metrics = app.add_subcommand("metrics", "compute per-user metric tables");
    metrics->require_subcommand(1);
    auto* mcausal = metrics->add_subcommand("causal", "causality metrics");
    std::string mc_index, mc_out;
    double mc_omega = 1e-9, mc_cap = 1e6;
    mcausal->add_option("--index", mc_index)->required();
    mcausal->add_option("--omega", mc_omega, "relative-likelihood smoothing");
    mcausal->add_option("--rel-cap", mc_cap, "relative-likelihood magnitude cap");
    mcausal->add_option("--out", mc_out)->required();

    auto* mbip = metrics->add_subcommand("bipartite", "user-message graph metrics");
    std::string mb_index, mb_out, mb_messages_out;
    std::optional<double> mb_gamma;
    double mb_damping = 0.85, mb_tol = 1e-8;
    int mb_max_iter = 100;
    mbip->add_option("--index", mb_index)->required();
    mbip->add_option("--gamma", mb_gamma, "time-decay rate (default 1/median duration)");
    mbip->add_option("--damping", mb_damping);
    mbip->add_option("--tol", mb_tol);
    mbip->add_option("--max-iter", mb_max_iter);
    mbip->add_option("--out", mb_out)->required();
    mbip->add_option("--messages-out", mb_messages_out, "per-message metrics CSV");

    auto* mug = metrics->add_subcommand("usergraph", "key-user graph metrics");
    std::string mu_index, mu_out;
    mug->add_option("--index", mu_index)->required();
    mug->add_option("--out", mu_out)->required();

    // ---- features ----
    auto* features = app.add_subcommand("features", "assemble or standardize feature tables");
    features->require_subcommand(1);
    auto* fassemble = features->add_subcommand("assemble", "join metric tables into one matrix");
    std::string fa_causal, fa_bipartite, fa_usergraph, fa_out, fa_select = "all";
    fassemble->add_option("--causal", fa_causal)->required();
    fassemble->add_option("--bipartite", fa_bipartite)->required();
    fassemble->add_option("--usergraph", fa_usergraph)->required();
    fassemble->add_option("--select", fa_select, "all|top10|causal");
    fassemble->add_option("--out", fa_out)->required();

    auto* fstd = features->add_subcommand("standardize", "z-score a feature matrix");
    std::string fs_in, fs_out;
    std::optional<std::string> fs_fit_stats, fs_apply_stats;
    fstd->add_option("--in", fs_in)->required();
    fstd->add_option("--out", fs_out)->required();
    fstd->add_option("--fit-stats", fs_fit_stats, "write fitted statistics here");
    fstd->add_option("--apply-stats", fs_apply_stats, "apply previously fitted statistics");

    // ---- train ----
    auto* train = app.add_subcommand("train", "fit a classifier");
    std::string tr_model = "rf", tr_features, tr_labels, tr_out, tr_class_weights = "balanced";
    std::optional<std::string> tr_config;
    std::uint64_t tr_seed = 1;
    train->add_option("--model", tr_model, "lr|rf|dnn");
    train->add_option("--features", tr_features)->required();
    train->add_option("--labels", tr_labels)->required();
    train->add_option("--config", tr_config, "model config JSON file");
    train->add_option("--class-weights", tr_class_weights, "balanced|none");
    train->add_option("--seed", tr_seed);
    train->add_option("--out", tr_out)->required();

    // ---- predict ----
    auto* predict = app.add_subcommand("predict", "score users with a trained model");
    std::string pr_model, pr_features, pr_out;
    predict->add_option("--model", pr_model)->required();
    predict->add_option("--features", pr_features)->required();
    predict->add_option("--out", pr_out)->required();

    // ---- wset ----
    auto* wsetc = app.add_subcommand("wset", "weighted self-training loop");
    std::string ws_features, ws_labels, ws_out, ws_audit, ws_model = "rf";
    std::optional<std::string> ws_config, ws_oracle;
    std::string ws_weighting = "verbatim", ws_oracle_missing = "skip";
    psm::WsetParams ws_params;
    wsetc->add_option("--features", ws_features)->required();
    wsetc->add_option("--labels", ws_labels, "seed labels CSV")->required();
    wsetc->add_option("--model", ws_model, "lr|rf|dnn");
    wsetc->add_option("--config", ws_config, "model config JSON file");
    wsetc->add_option("--theta-pr", ws_params.theta_pr);
    wsetc->add_option("--alpha", ws_params.alpha);
    wsetc->add_option("--theta-tr", ws_params.theta_tr);
    wsetc->add_option("--beta", ws_params.beta);
    wsetc->add_option("--min-selected", ws_params.min_selected);
    wsetc->add_option("--dev-fraction", ws_params.dev_fraction);
    wsetc->add_option("--weighting", ws_weighting, "verbatim|inverted");
    wsetc->add_option("--seed", ws_params.seed);
    wsetc->add_option("--oracle", ws_oracle, "full labels: supervised-in-the-loop variant");
    wsetc->add_option("--oracle-missing", ws_oracle_missing, "skip|abort");
    wsetc->add_option("--out", ws_out, "final pool CSV")->required();
    wsetc->add_option("--audit", ws_audit, "per-iteration audit JSONL")->required();

    // ---- evaluate ----
    auto* eval = app.add_subcommand("evaluate", "precision/recall/F1, ROC and PR curves");
    std::string ev_scores, ev_labels, ev_out;
    std::optional<std::string> ev_curves, ev_audit, ev_selection_out;
    double ev_threshold = 0.5;
    std::optional<double> ev_at_precision;
    eval->add_option("--scores", ev_scores)->required();
    eval->add_option("--labels", ev_labels)->required();
    eval->add_option("--threshold", ev_threshold);
    eval->add_option("--at-precision", ev_at_precision, "report recall at this precision");
    eval->add_option("--curves", ev_curves, "write ROC/PR points CSV");
    eval->add_option("--audit", ev_audit, "wset audit for cumulative selection curves");
    eval->add_option("--selection-curve", ev_selection_out, "cumulative selection CSV");
    eval->add_option("--out", ev_out)->required();

    // ---- pipeline ----
    auto* pipe = app.add_subcommand("pipeline", "run every stage end to end");
    std::string pl_config;
    std::optional<std::string> pl_out_dir;
    std::optional<std::uint64_t> pl_seed;
    bool pl_force = false;
    pipe->add_option("--config", pl_config, "pipeline config JSON")->required();
    pipe->add_option("--out-dir", pl_out_dir, "override config out_dir");
    pipe->add_option("--seed", pl_seed, "override config seed");
    pipe->add_flag("--force", pl_force, "rebuild every stage");

    CLI11_PARSE(app, argc, argv);
    psm::set_thread_cap(threads);

    if (*synth) {
        psm::SynthConfig cfg;
        if (!synth_config_path.empty()) cfg = psm::load_synth_config(synth_config_path);
        if (synth_seed) cfg.seed = *synth_seed;
        psm::write_synth_output(synth_out_dir, psm::generate_synthetic(cfg));
        std::cout << "synth: wrote " << synth_out_dir << "/actions.csv\n";
        return kExitOk;
    }

    if (*ingest) {
        psm::ActionFormat fmt = psm::ActionFormat::autodetect;
        if (ing_format == "csv") fmt = psm::ActionFormat::csv;
        else if (ing_format == "jsonl") fmt = psm::ActionFormat::jsonl;
        else if (ing_format != "auto") throw psm::UsageError("--format must be auto|csv|jsonl");
        psm::IngestReport report;
        const auto log = psm::ingest_actions_file(
            ing_actions, ing_verified, ing_strict ? psm::ParseMode::strict : psm::ParseMode::lenient,
            fmt, &report);
        const auto index = psm::build_cascade_index(log, ing_theta, ing_phi);
        psm::save_index(ing_out, log, index);
        for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
        std::cout << "ingest: " << report.tuples_kept << " tuples, " << log.user_count()
                  << " users, " << log.message_count() << " messages, "
                  << index.viral_count() << " viral (rho=" << psm::format_double(index.rho())
                  << "), " << report.duplicates_dropped << " duplicates dropped, "
                  << report.malformed << " malformed skipped\n";
        return kExitOk;
    }

    if (*mcausal) {
        const auto bundle = psm::load_index(mc_index);
        psm::CausalityParams params;
        params.omega = mc_omega;
        params.rel_cap = mc_cap;
        const auto table =
            psm::causality_table(bundle.log, bundle.index, psm::compute_causality(bundle.index, params));
        psm::write_table(mc_out, table);
        psm::ArtifactMeta meta;
        meta.kind = "causal";
        meta.index_fingerprint = psm::to_hex(bundle.index.fingerprint());
        meta.input_fingerprint = meta.index_fingerprint;
        meta.params["omega"] = psm::format_double(mc_omega);
        psm::write_meta(mc_out, meta);
        std::cout << "metrics causal: " << table.size() << " key users\n";
        return kExitOk;
    }

    if (*mbip) {
        const auto bundle = psm::load_index(mb_index);
        const auto graph = psm::build_bipartite_graph(bundle.log);
        psm::PageRankParams pp;
        pp.damping = mb_damping;
        pp.tol = mb_tol;
        pp.max_iter = mb_max_iter;
        const auto pr = psm::pagerank(graph, pp);
        const double gamma = mb_gamma ? *mb_gamma : psm::default_gamma(bundle.index);
        auto feats = psm::bipartite_features(bundle.log, bundle.index, graph, pr, gamma);
        psm::write_table(mb_out, feats.users);
        psm::ArtifactMeta meta;
        meta.kind = "bipartite";
        meta.index_fingerprint = psm::to_hex(bundle.index.fingerprint());
        meta.input_fingerprint = meta.index_fingerprint;
        meta.params["gamma"] = psm::format_double(gamma);
        psm::write_meta(mb_out, meta);
        if (!mb_messages_out.empty()) {
            psm::write_table(mb_messages_out, feats.messages);
            meta.kind = "bipartite-messages";
            psm::write_meta(mb_messages_out, meta);
        }
        std::cout << "metrics bipartite: " << feats.users.size() << " key users (gamma="
                  << psm::format_double(gamma) << ")\n";
        return kExitOk;
    }

    if (*mug) {
        const auto bundle = psm::load_index(mu_index);
        const auto graph = psm::build_user_graph(bundle.index);
        const auto related = psm::all_related_sets(bundle.index);
        const auto feats = psm::user_graph_features(bundle.log, bundle.index, graph, related);
        psm::write_table(mu_out, feats.users);
        psm::ArtifactMeta meta;
        meta.kind = "usergraph";
        meta.index_fingerprint = psm::to_hex(bundle.index.fingerprint());
        meta.input_fingerprint = meta.index_fingerprint;
        psm::write_meta(mu_out, meta);
        std::cout << "metrics usergraph: " << feats.users.size() << " nodes\n";
        return kExitOk;
    }

    if (*fassemble) {
        auto matrix = psm::assemble_files(fa_causal, fa_bipartite, fa_usergraph);
        matrix = psm::select_columns(matrix, psm::feature_selection(fa_select));
        psm::write_features(fa_out, matrix);
        std::cout << "features: " << matrix.table.size() << " rows x " << matrix.table.width()
                  << " columns\n";
        return kExitOk;
    }

    if (*fstd) {
        const auto table = psm::read_table(fs_in);
        psm::StandardizeStats stats;
        if (fs_apply_stats) {
            stats = psm::load_standardize_stats(*fs_apply_stats);
            psm::write_table(fs_out, psm::standardize(table, &stats, nullptr));
        } else {
            psm::write_table(fs_out, psm::standardize(table, nullptr, &stats));
            if (fs_fit_stats) psm::save_standardize_stats(*fs_fit_stats, stats);
        }
        return kExitOk;
    }

    if (*train) {
        const auto features_m = psm::read_table(tr_features);
        const auto labels = psm::read_labels_csv(tr_labels);
        std::vector<std::size_t> rows;
        const auto y = labels_for(features_m, labels, rows);
        const auto x = subtable(features_m, rows);
        std::string config_json;
        if (tr_config) {
            std::ifstream in(*tr_config, std::ios::binary);
            if (!in) throw psm::DataError("cannot open model config " + *tr_config);
            config_json.assign((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
        }
        psm::ClassWeights cw;
        if (tr_class_weights == "balanced") cw = psm::balanced_class_weights(y);
        else if (tr_class_weights != "none") throw psm::UsageError("--class-weights balanced|none");
        const auto model = psm::train_model(tr_model, config_json, x, y, {}, cw, tr_seed);
        psm::save_model(tr_out, *model);
        std::cout << "train: " << tr_model << " on " << x.size() << " rows -> " << tr_out << "\n";
        return kExitOk;
    }

    if (*predict) {
        const auto model = psm::load_model(pr_model);
        const auto features_m = psm::read_table(pr_features);
        const auto scores = model->predict_positive(features_m);
        std::vector<std::pair<std::string, double>> rows;
        rows.reserve(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i) {
            rows.emplace_back(features_m.keys[i], scores[i]);
        }
        psm::write_scores_csv(pr_out, rows);
        std::cout << "predict: " << rows.size() << " scores -> " << pr_out << "\n";
        return kExitOk;
    }

    if (*wsetc) {
        const auto features_m = psm::read_table(ws_features);
        psm::WsetInput input;
        input.features = &features_m;
        input.seed_labels = psm::read_labels_csv(ws_labels);
        if (ws_weighting == "inverted") ws_params.inverted_weighting = true;
        else if (ws_weighting != "verbatim") throw psm::UsageError("--weighting verbatim|inverted");
        if (ws_oracle_missing == "abort") ws_params.oracle_abort_on_missing = true;
        else if (ws_oracle_missing != "skip") throw psm::UsageError("--oracle-missing skip|abort");

        std::unordered_map<std::string, int> oracle;
        if (ws_oracle) {
            for (const auto& l : psm::read_labels_csv(*ws_oracle)) {
                oracle[l.user] = l.positive ? 1 : 0;
            }
            input.oracle = &oracle;
        }
        std::string config_json;
        if (ws_config) {
            std::ifstream in(*ws_config, std::ios::binary);
            if (!in) throw psm::DataError("cannot open model config " + *ws_config);
            config_json.assign((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
        }
        psm::TrainerFn trainer = [&](const Table& x, const std::vector<int>& y,
                                     const std::vector<double>& w, std::uint64_t seed) {
            return psm::train_model(ws_model, config_json, x, y, w,
                                    psm::balanced_class_weights(y), seed);
        };
        const auto result = psm::wset(input, ws_params, trainer);
        psm::write_pool_csv(ws_out, result.pool);
        psm::write_audit_jsonl(ws_audit, result);
        std::cout << "wset: " << result.audit.size() << " iterations, pool " << result.pool.size()
                  << " rows, termination " << result.termination << "\n";
        return kExitOk;
    }

    if (*eval) {
        const auto score_rows = psm::read_scores_csv(ev_scores);
        std::unordered_map<std::string, int> truth;
        for (const auto& l : psm::read_labels_csv(ev_labels)) truth[l.user] = l.positive ? 1 : 0;
        std::vector<double> scores;
        std::vector<int> y;
        for (const auto& [user, s] : score_rows) {
            auto it = truth.find(user);
            if (it == truth.end()) throw psm::DataError("no label for scored user " + user);
            scores.push_back(s);
            y.push_back(it->second);
        }
        const auto rep = psm::classification_report(scores, y, ev_threshold);
        json out;
        out["format_version"] = 1;
        out["threshold"] = rep.threshold;
        out["confusion"] = {{"tp", rep.confusion.tp},
                            {"fp", rep.confusion.fp},
                            {"tn", rep.confusion.tn},
                            {"fn", rep.confusion.fn}};
        out["precision"] = flagged_json(rep.precision);
        out["recall"] = flagged_json(rep.recall);
        out["f1"] = flagged_json(rep.f1);
        out["auc"] = flagged_json(rep.auc);
        if (ev_at_precision) {
            out["recall_at_precision"] = {
                {"target", *ev_at_precision},
                {"recall", psm::recall_at_precision(scores, y, *ev_at_precision)}};
        }
        std::ofstream repf(ev_out, std::ios::binary);
        if (!repf) throw psm::DataError("cannot write " + ev_out);
        repf << out.dump(2) << '\n';

        if (ev_curves) {
            std::ofstream cf(*ev_curves, std::ios::binary);
            if (!cf) throw psm::DataError("cannot write " + *ev_curves);
            cf << "curve,x,y\n";
            for (const auto& p : rep.roc) {
                cf << "roc," << psm::format_double(p[0]) << ',' << psm::format_double(p[1]) << '\n';
            }
            for (const auto& p : rep.pr) {
                cf << "pr," << psm::format_double(p[0]) << ',' << psm::format_double(p[1]) << '\n';
            }
        }
        if (ev_audit && ev_selection_out) {
            const auto audit = psm::read_audit_jsonl(*ev_audit);
            const auto curve = psm::cumulative_selection_curve(audit, truth);
            std::ofstream sf(*ev_selection_out, std::ios::binary);
            if (!sf) throw psm::DataError("cannot write " + *ev_selection_out);
            sf << "it,cum_pos_tp,cum_pos_fp,cum_neg_tn,cum_neg_fn\n";
            for (const auto& p : curve) {
                sf << p.it << ',' << p.cum_pos_tp << ',' << p.cum_pos_fp << ',' << p.cum_neg_tn
                   << ',' << p.cum_neg_fn << '\n';
            }
        }
        std::cout << "evaluate: wrote " << ev_out << "\n";
        return kExitOk;
    }

    if (*pipe) {
        auto cfg = psm::load_pipeline_config(pl_config);
        if (pl_out_dir) cfg.out_dir = *pl_out_dir;
        if (pl_seed) {
            cfg.seed = *pl_seed;
            if (cfg.wset) cfg.wset->seed = *pl_seed;
        }
        const auto res = psm::run_pipeline(cfg, pl_force);
        std::cout << "pipeline: wrote " << res.report_path << "\n";
        return kExitOk;
    }

    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const psm::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const psm::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}
