#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace psm {

// The six aggregation functions applied to neighbor-value sets. Median of an
// even-length list is the mean of the two middle values; std is the
// population standard deviation. All statistics over an empty set are 0 with
// defined=false.
struct StatSummary {
    double sum = 0.0;
    double max = 0.0;
    double min = 0.0;
    double avg = 0.0;
    double med = 0.0;
    double std = 0.0;
    bool defined = false;
};

inline StatSummary summarize(std::span<const double> values) {
    StatSummary s;
    if (values.empty()) return s;
    s.defined = true;
    s.max = values[0];
    s.min = values[0];
    for (double v : values) {
        s.sum += v;
        s.max = std::max(s.max, v);
        s.min = std::min(s.min, v);
    }
    const double n = static_cast<double>(values.size());
    s.avg = s.sum / n;

    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    s.med = (sorted.size() % 2 == 1) ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2.0;

    double ss = 0.0;
    for (double v : values) {
        const double d = v - s.avg;
        ss += d * d;
    }
    s.std = std::sqrt(ss / n);
    return s;
}

inline const char* const kStatNames[6] = {"sum", "max", "min", "avg", "med", "std"};

inline double stat_by_index(const StatSummary& s, int idx) {
    switch (idx) {
        case 0: return s.sum;
        case 1: return s.max;
        case 2: return s.min;
        case 3: return s.avg;
        case 4: return s.med;
        default: return s.std;
    }
}

}  // namespace psm
