#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "psm/types.hpp"
#include "psm/wset.hpp"

namespace psm {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;
};

struct EvalReport {
    double threshold = 0.5;
    ConfusionCounts confusion;
    Flagged precision;
    Flagged recall;
    Flagged f1;
    Flagged auc;                             // trapezoidal over the ROC, ties grouped
    std::vector<std::array<double, 2>> roc;  // (fpr, tpr), monotone in fpr
    std::vector<std::array<double, 2>> pr;   // (recall, precision)
};

// Positive prediction iff score >= threshold. Zero-division cases are 0
// with a cleared flag.
EvalReport classification_report(const std::vector<double>& scores, const std::vector<int>& labels,
                                 double threshold = 0.5);

// Maximum recall over thresholds whose precision reaches the target; 0 when
// unattainable.
double recall_at_precision(const std::vector<double>& scores, const std::vector<int>& labels,
                           double target);

// Running per-iteration selection totals against ground truth. For the
// positive class tp/fp, for the negative class tn/fn.
struct SelectionCurvePoint {
    int it = 0;
    std::int64_t cum_pos_tp = 0;
    std::int64_t cum_pos_fp = 0;
    std::int64_t cum_neg_tn = 0;
    std::int64_t cum_neg_fn = 0;
};

std::vector<SelectionCurvePoint> cumulative_selection_curve(
    const std::vector<IterationAudit>& audit,
    const std::unordered_map<std::string, int>& truth);

}  // namespace psm
