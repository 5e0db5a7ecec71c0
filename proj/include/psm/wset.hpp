#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "psm/csv.hpp"
#include "psm/models/model.hpp"
#include "psm/types.hpp"

namespace psm {

struct WsetParams {
    double theta_pr = 1.0;    // precision target at iteration 1
    double alpha = 0.05;      // per-iteration target decrement
    double theta_tr = 0.03;   // tolerated dev-accuracy drop
    double beta = 0.1;        // decay-weight rate
    std::size_t min_selected = 1;
    double clamp_eps = 1e-6;  // confidence clamp keeping the weight finite
    bool inverted_weighting = false;  // escape hatch: exp(-beta*it*(1-p))
    double dev_fraction = 0.5;
    std::uint64_t seed = 0;
    bool oracle_abort_on_missing = false;
};

// A trained-model provider; wset retrains through this each iteration.
using TrainerFn = std::function<std::unique_ptr<Model>(
    const Table& features, const std::vector<int>& labels, const std::vector<double>& weights,
    std::uint64_t seed)>;

// Smallest confidence threshold whose prefix precision for the predicted
// label reaches `target` on the development set; nullopt when none does.
// Rows carry the confidence for the label under consideration and whether
// the true label matches it. Ties are grouped (scanned as one step).
struct ScoredDevRow {
    double confidence;
    bool is_label;
};
std::optional<double> find_precision_threshold(std::vector<ScoredDevRow> dev, double target);

// Exponential decay weight, exactly as written: exp(-beta*it*(1/(1-p)))
// with p clamped to 1-clamp_eps first. Clamped below to the smallest normal
// double so stored weights stay positive.
double decay_weight(double p, int it, double beta, double clamp_eps = 1e-6);

// ---------------------------------------------------------------------------
// Self-training state and loop
// ---------------------------------------------------------------------------

struct SelfTrainState {
    // row indices into the shared feature table
    std::vector<std::size_t> train_rows;  // L_t
    std::vector<int> train_labels;
    std::vector<double> train_weights;
    std::vector<std::string> train_source;  // seed | pseudo | corrected
    std::vector<int> train_iteration;       // 0 for seeds
    std::vector<std::size_t> dev_rows;      // L_d (fixed)
    std::vector<int> dev_labels;
    std::vector<std::size_t> unlabeled_rows;  // U
    int it = 1;
};

struct SelectionRecord {
    std::string user;
    int label;  // pseudo-label (possibly corrected)
    double confidence;
    double weight;
    bool corrected = false;
};

struct IterationAudit {
    int it = 0;
    double target_precision = 0.0;
    std::optional<double> thr_pos;
    std::optional<double> thr_neg;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    double c = 0.0;        // baseline dev accuracy (never updated)
    double c_prime = 0.0;  // dev accuracy after this iteration's retrain
    bool retrained = false;
    std::size_t pool_labeled = 0;
    std::size_t pool_unlabeled = 0;
    std::vector<SelectionRecord> selected;
};

struct UpdResult {
    std::optional<double> thr_pos;
    std::optional<double> thr_neg;
    std::vector<SelectionRecord> selected;  // appended to L_t, removed from U
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

// One dataset-update step: per label, search the dev threshold for target
// theta_pr - alpha*(it-1), select every unlabeled row at or above it, weight
// by decay_weight and append with the model-assigned pseudo-label. Rows
// passing both thresholds are taken as positives.
UpdResult updwset(SelfTrainState& state, const Table& features,
                  const std::vector<double>& unlabeled_conf_pos,
                  const std::vector<double>& dev_conf_pos, const std::vector<int>& dev_labels,
                  const WsetParams& params);

struct WsetResult {
    std::vector<IterationAudit> audit;
    double baseline_accuracy = 0.0;
    std::string termination;  // dev_accuracy_drop | min_selected

    // final L_t
    struct PoolEntry {
        std::string user;
        int label;
        double weight;
        std::string source;
        int iteration;
    };
    std::vector<PoolEntry> pool;
};

struct WsetInput {
    const Table* features = nullptr;         // rows for L and U users
    std::vector<LabeledUser> seed_labels;    // L
    // When set, L_d is exactly these users (must be a subset of L) and L_t
    // the rest; otherwise a seeded stratified split by dev_fraction.
    std::optional<std::vector<std::string>> explicit_dev;
    // Supervised variant: truth for positive selections, queried each
    // iteration. label: 1 = psm.
    const std::unordered_map<std::string, int>* oracle = nullptr;
};

WsetResult wset(const WsetInput& input, const WsetParams& params, const TrainerFn& trainer);

// ---------------------------------------------------------------------------
// Artifact IO
// ---------------------------------------------------------------------------

void write_pool_csv(const std::string& path, const std::vector<WsetResult::PoolEntry>& pool);
void write_audit_jsonl(const std::string& path, const WsetResult& result);
std::vector<IterationAudit> read_audit_jsonl(const std::string& path);

}  // namespace psm
