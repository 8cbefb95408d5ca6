#pragma once

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "afsl/dataset.hpp"

namespace afsl {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
};

namespace detail {

inline bool contains_label(const LabelIndexSet& set, int label) {
    return std::find(set.begin(), set.end(), label) != set.end();
}

inline double f1_from_counts(const ConfusionCounts& c) {
    const std::int64_t denom = 2 * c.tp + c.fp + c.fn;
    return denom == 0 ? 0.0 : static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

}  // namespace detail

/// F1 over label decisions pooled across all samples and labels. Equals
/// accuracy when both sides are single-label.
inline double micro_f1(const std::vector<LabelIndexSet>& gold,
                       const std::vector<LabelIndexSet>& pred) {
    if (gold.size() != pred.size())
        throw std::invalid_argument("micro_f1: gold/pred length mismatch (" +
                                    std::to_string(gold.size()) + " vs " +
                                    std::to_string(pred.size()) + ")");
    ConfusionCounts c;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        std::int64_t tp = 0;
        for (int p : pred[i])
            if (detail::contains_label(gold[i], p)) ++tp;
        c.tp += tp;
        c.fp += static_cast<std::int64_t>(pred[i].size()) - tp;
        c.fn += static_cast<std::int64_t>(gold[i].size()) - tp;
    }
    return detail::f1_from_counts(c);
}

/// Unweighted mean of per-label F1 over every label in the set; a label with
/// no decisions at all contributes 0.
inline double macro_f1(const std::vector<LabelIndexSet>& gold,
                       const std::vector<LabelIndexSet>& pred, const LabelSet& label_set) {
    if (gold.size() != pred.size())
        throw std::invalid_argument("macro_f1: gold/pred length mismatch");
    std::vector<ConfusionCounts> per_label(label_set.size());
    for (std::size_t i = 0; i < gold.size(); ++i) {
        for (int p : pred[i]) {
            if (detail::contains_label(gold[i], p))
                ++per_label[static_cast<std::size_t>(p)].tp;
            else
                ++per_label[static_cast<std::size_t>(p)].fp;
        }
        for (int g : gold[i])
            if (!detail::contains_label(pred[i], g)) ++per_label[static_cast<std::size_t>(g)].fn;
    }
    double sum = 0.0;
    for (const auto& c : per_label) sum += detail::f1_from_counts(c);
    return sum / static_cast<double>(label_set.size());
}

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;  // sample form (n-1); 0 for a single value
};

inline Aggregate aggregate(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("aggregate: empty input");
    long double sum = 0.0L;
    for (double v : values) sum += v;
    Aggregate out;
    out.mean = static_cast<double>(sum / static_cast<long double>(values.size()));
    if (values.size() > 1) {
        long double ss = 0.0L;
        for (double v : values) {
            const long double d = static_cast<long double>(v) - out.mean;
            ss += d * d;
        }
        out.stddev =
            static_cast<double>(std::sqrt(ss / static_cast<long double>(values.size() - 1)));
    }
    return out;
}

/// Fraction -> percent string with one decimal, round half to even
/// (the tables' presentation).
inline std::string format_percent(double fraction) {
    const int old_mode = std::fegetround();
    std::fesetround(FE_TONEAREST);  // ties-to-even
    const double scaled = std::nearbyint(fraction * 1000.0);
    std::fesetround(old_mode);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", scaled / 10.0);
    return buf;
}

}  // namespace afsl
