#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "afsl/matrix.hpp"

namespace afsl {

/// Encoder last-hidden-state rows with a validity mask (padding excluded).
struct TokenMatrix {
    Matrix vectors;           // T_in x d
    std::vector<bool> mask;   // length T_in, at least one true
};

using ScoreVector = std::vector<double>;  // one entry per class, each in [0, 1]

/// Mean of the masked token vectors; the dense sample representation.
inline std::vector<double> mean_pool(const TokenMatrix& tokens) {
    if (tokens.mask.size() != tokens.vectors.rows())
        throw std::invalid_argument("mean_pool: mask length must match row count");
    const std::size_t d = tokens.vectors.cols();
    std::vector<long double> acc(d, 0.0L);
    std::size_t n = 0;
    for (std::size_t t = 0; t < tokens.vectors.rows(); ++t) {
        if (!tokens.mask[t]) continue;
        ++n;
        const auto row = tokens.vectors.row(t);
        for (std::size_t j = 0; j < d; ++j) acc[j] += row[j];
    }
    if (n == 0) throw std::invalid_argument("mean_pool: mask selects no tokens");
    std::vector<double> out(d);
    for (std::size_t j = 0; j < d; ++j)
        out[j] = static_cast<double>(acc[j] / static_cast<long double>(n));
    return out;
}

/// Row-wise softmax over class-restricted logits (T x N in, T x N out).
/// Each row is stabilized by subtracting its max before exponentiation, so
/// arbitrarily large logits stay finite.
inline Matrix class_softmax(const Matrix& logits) {
    if (logits.rows() == 0 || logits.cols() == 0)
        throw std::invalid_argument("class_softmax: empty logits");
    for (double v : logits.data())
        if (!std::isfinite(v)) throw std::invalid_argument("class_softmax: non-finite logit");

    Matrix probs(logits.rows(), logits.cols());
    for (std::size_t t = 0; t < logits.rows(); ++t) {
        const auto row = logits.row(t);
        const double m = *std::max_element(row.begin(), row.end());
        long double sum = 0.0L;
        for (std::size_t n = 0; n < row.size(); ++n) {
            const double e = std::exp(row[n] - m);
            probs(t, n) = e;
            sum += e;
        }
        for (std::size_t n = 0; n < row.size(); ++n)
            probs(t, n) = static_cast<double>(probs(t, n) / sum);
    }
    return probs;
}

/// Per-class maximum probability over the output positions. For multi-label
/// outputs different classes can peak at different positions, so the result
/// need not sum to one.
inline ScoreVector score_vector(const Matrix& probs) {
    if (probs.rows() == 0 || probs.cols() == 0)
        throw std::invalid_argument("score_vector: empty input");
    ScoreVector out(probs.cols());
    for (std::size_t n = 0; n < probs.cols(); ++n) {
        double best = probs(0, n);
        for (std::size_t t = 1; t < probs.rows(); ++t) best = std::max(best, probs(t, n));
        out[n] = best;
    }
    return out;
}

/// Shannon entropy (natural log) of the score vector renormalized to a
/// distribution. 0*ln 0 counts as 0. Score vectors may not sum to one, so
/// they are divided by their sum first; single-label T=1 vectors already sum
/// to one and pass through unchanged.
inline double entropy(std::span<const double> scores) {
    long double sum = 0.0L;
    for (double s : scores) {
        if (s < 0.0) throw std::invalid_argument("entropy: negative score");
        sum += s;
    }
    if (!(sum > 0.0L)) throw std::invalid_argument("entropy: all-zero score vector");
    long double h = 0.0L;
    for (double s : scores) {
        if (s <= 0.0) continue;
        const long double q = s / sum;
        h -= q * std::log(static_cast<double>(q));
    }
    return static_cast<double>(h);
}

/// Full per-sample pipeline: class-restricted logits -> score vector.
inline ScoreVector scores_from_logits(const Matrix& logits) {
    return score_vector(class_softmax(logits));
}

}  // namespace afsl
