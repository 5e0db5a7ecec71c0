#include "psm/eval.hpp"

#include <algorithm>
#include <numeric>

namespace psm {

EvalReport classification_report(const std::vector<double>& scores, const std::vector<int>& labels,
                                 double threshold) {
    if (scores.size() != labels.size()) throw DataError("scores/labels size mismatch");
    EvalReport rep;
    rep.threshold = threshold;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        if (pred && labels[i]) ++rep.confusion.tp;
        else if (pred && !labels[i]) ++rep.confusion.fp;
        else if (!pred && labels[i]) ++rep.confusion.fn;
        else ++rep.confusion.tn;
    }
    const auto& c = rep.confusion;
    if (c.tp + c.fp > 0) {
        rep.precision = Flagged::of(static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp));
    }
    if (c.tp + c.fn > 0) {
        rep.recall = Flagged::of(static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn));
    }
    if (rep.precision.defined && rep.recall.defined &&
        rep.precision.value + rep.recall.value > 0.0) {
        rep.f1 = Flagged::of(2.0 * rep.precision.value * rep.recall.value /
                             (rep.precision.value + rep.recall.value));
    }

    // ROC / PR at every distinct score, descending; equal scores flip together
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::int64_t pos = 0, neg = 0;
    for (int y : labels) (y ? pos : neg) += 1;

    rep.roc.push_back({0.0, 0.0});
    std::int64_t tp = 0, fp = 0;
    double auc = 0.0;
    double prev_fpr = 0.0, prev_tpr = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] ? tp : fp) += 1;
            ++i;
        }
        const double fpr = neg > 0 ? static_cast<double>(fp) / static_cast<double>(neg) : 0.0;
        const double tpr = pos > 0 ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0;
        rep.roc.push_back({fpr, tpr});
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_fpr = fpr;
        prev_tpr = tpr;
        if (tp + fp > 0) {
            rep.pr.push_back({tpr, static_cast<double>(tp) / static_cast<double>(tp + fp)});
        }
    }
    if (pos > 0 && neg > 0) rep.auc = Flagged::of(auc);
    return rep;
}

double recall_at_precision(const std::vector<double>& scores, const std::vector<int>& labels,
                           double target) {
    if (scores.size() != labels.size()) throw DataError("scores/labels size mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::int64_t pos = 0;
    for (int y : labels) pos += y;
    if (pos == 0) return 0.0;

    double best = 0.0;
    std::int64_t tp = 0, total = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            ++total;
            tp += labels[order[i]];
            ++i;
        }
        const double precision = static_cast<double>(tp) / static_cast<double>(total);
        if (precision >= target) {
            best = std::max(best, static_cast<double>(tp) / static_cast<double>(pos));
        }
    }
    return best;
}

std::vector<SelectionCurvePoint> cumulative_selection_curve(
    const std::vector<IterationAudit>& audit,
    const std::unordered_map<std::string, int>& truth) {
    std::vector<SelectionCurvePoint> out;
    SelectionCurvePoint acc;
    for (const auto& a : audit) {
        acc.it = a.it;
        for (const auto& s : a.selected) {
            auto it = truth.find(s.user);
            if (it == truth.end()) throw DataError("selection audit references unknown user " + s.user);
            const bool truly_pos = it->second == 1;
            if (s.label == 1) {
                (truly_pos ? acc.cum_pos_tp : acc.cum_pos_fp) += 1;
            } else {
                (truly_pos ? acc.cum_neg_fn : acc.cum_neg_tn) += 1;
            }
        }
        out.push_back(acc);
    }
    return out;
}

}  // namespace psm
