#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "afsl/dataset.hpp"
#include "afsl/kmeans.hpp"
#include "afsl/matrix.hpp"
#include "afsl/scoring.hpp"

namespace afsl {

enum class Strategy { random, rep_en, rep_sc, un, unrep, clun_en, clun_sc };
enum class UncertaintyMeasure { entropy, least_confidence };

inline const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::random: return "random";
        case Strategy::rep_en: return "rep-en";
        case Strategy::rep_sc: return "rep-sc";
        case Strategy::un: return "un";
        case Strategy::unrep: return "unrep";
        case Strategy::clun_en: return "clun-en";
        case Strategy::clun_sc: return "clun-sc";
    }
    return "?";
}

inline Strategy parse_strategy(const std::string& name) {
    for (Strategy s : {Strategy::random, Strategy::rep_en, Strategy::rep_sc, Strategy::un,
                       Strategy::unrep, Strategy::clun_en, Strategy::clun_sc})
        if (name == to_string(s)) return s;
    throw std::invalid_argument("unknown strategy '" + name +
                                "' (expected one of: random, rep-en, rep-sc, un, unrep, "
                                "clun-en, clun-sc)");
}

inline bool strategy_uses_uncertainty(Strategy s) {
    return s == Strategy::un || s == Strategy::unrep || s == Strategy::clun_en ||
           s == Strategy::clun_sc;
}

inline bool strategy_needs_scores(Strategy s) {
    return s == Strategy::rep_sc || strategy_uses_uncertainty(s);
}

inline bool strategy_needs_encoder(Strategy s) {
    return s == Strategy::rep_en || s == Strategy::unrep || s == Strategy::clun_en;
}

/// Everything a strategy may look at. Deliberately excludes labels: labels
/// become visible only after selection, via annotation.
struct SelectionRequest {
    std::vector<SampleId> pool_ids;
    const Matrix* en = nullptr;  // |pool| x d, row-aligned to pool_ids
    const Matrix* sc = nullptr;  // |pool| x N, row-aligned to pool_ids
    std::size_t m = 0;
    std::size_t alpha = 10;      // candidate multiplier, unrep only
    std::uint64_t seed = 0;
    std::size_t iteration_index = 0;
    UncertaintyMeasure clun_measure = UncertaintyMeasure::entropy;
};

struct Selection {
    std::vector<SampleId> chosen_ids;          // m distinct pool ids
    std::vector<std::string> rationale;        // per chosen id
    std::vector<SampleId> candidate_ids;       // unrep: the uncertainty-filtered pool
};

namespace detail {

inline void check_request(const SelectionRequest& req, bool needs_en, bool needs_sc,
                          bool needs_history) {
    if (req.m == 0) throw std::invalid_argument("selection: m must be positive");
    if (req.m > req.pool_ids.size())
        throw std::invalid_argument("selection: m = " + std::to_string(req.m) +
                                    " exceeds pool size " + std::to_string(req.pool_ids.size()));
    if (needs_en) {
        if (req.en == nullptr) throw std::invalid_argument("selection: encoder embeddings required");
        if (req.en->rows() != req.pool_ids.size())
            throw std::invalid_argument("selection: encoder matrix not aligned to pool");
    }
    if (needs_sc) {
        if (req.sc == nullptr) throw std::invalid_argument("selection: score embeddings required");
        if (req.sc->rows() != req.pool_ids.size())
            throw std::invalid_argument("selection: score matrix not aligned to pool");
    }
    if (needs_history && req.iteration_index == 0)
        throw std::invalid_argument(
            "selection: uncertainty-based strategies cannot run in the first iteration; "
            "the model has not been fine-tuned yet");
}

inline double uncertainty_of(std::span<const double> score_row, UncertaintyMeasure measure) {
    if (measure == UncertaintyMeasure::entropy) return entropy(score_row);
    // least confidence: low peak probability = high doubt
    return 1.0 - *std::max_element(score_row.begin(), score_row.end());
}

/// Row indices of the `count` highest-entropy score rows; entropy ties break
/// toward the lower sample id.
inline std::vector<std::size_t> top_uncertain_rows(const SelectionRequest& req,
                                                   std::size_t count,
                                                   UncertaintyMeasure measure) {
    std::vector<double> u(req.pool_ids.size());
    for (std::size_t i = 0; i < req.pool_ids.size(); ++i)
        u[i] = uncertainty_of(req.sc->row(i), measure);
    std::vector<std::size_t> order(req.pool_ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (u[a] != u[b]) return u[a] > u[b];
        return req.pool_ids[a] < req.pool_ids[b];
    });
    order.resize(count);
    return order;
}

inline std::string format_value(double v) { return format_double(v); }

}  // namespace detail

/// Uniform draw of m ids without replacement. Ignores all embeddings.
inline Selection sample_random(const SelectionRequest& req) {
    detail::check_request(req, false, false, false);
    Rng rng(mix_seed(req.seed, 0x72616e64ULL));
    Selection out;
    for (std::size_t row : rng.sample_without_replacement(req.pool_ids.size(), req.m)) {
        out.chosen_ids.push_back(req.pool_ids[row]);
        out.rationale.emplace_back("random");
    }
    return out;
}

/// Cluster the pool into m groups and take each cluster's member nearest to
/// its centroid.
inline Selection sample_representative(const SelectionRequest& req, const Matrix& embeddings) {
    if (embeddings.rows() != req.pool_ids.size())
        throw std::invalid_argument("selection: embedding matrix not aligned to pool");
    if (req.m == 0 || req.m > req.pool_ids.size())
        throw std::invalid_argument("selection: m out of range");
    const ClusterModel model = kmeans(embeddings, req.m, req.seed);
    Selection out;
    for (std::size_t row : nearest_to_centroids(model, embeddings)) {
        out.chosen_ids.push_back(req.pool_ids[row]);
        out.rationale.emplace_back("cluster " + std::to_string(model.assignment[row]));
    }
    return out;
}

inline Selection sample_representative(const SelectionRequest& req, bool use_encoder) {
    detail::check_request(req, use_encoder, !use_encoder, false);
    return sample_representative(req, use_encoder ? *req.en : *req.sc);
}

/// The m pool ids whose score vectors have the highest entropy.
inline Selection sample_uncertainty(const SelectionRequest& req) {
    detail::check_request(req, false, true, true);
    Selection out;
    for (std::size_t row : detail::top_uncertain_rows(req, req.m, UncertaintyMeasure::entropy)) {
        out.chosen_ids.push_back(req.pool_ids[row]);
        out.rationale.emplace_back("entropy " +
                                   detail::format_value(entropy(req.sc->row(row))));
    }
    return out;
}

/// Uncertainty-filtered representative sampling: keep the alpha*m
/// highest-entropy candidates (clamped to the pool size), then representative
/// selection over their encoder embeddings.
inline Selection sample_uncertainty_representative(const SelectionRequest& req) {
    detail::check_request(req, true, true, true);
    if (req.alpha == 0) throw std::invalid_argument("selection: alpha must be positive");
    const std::size_t candidate_count =
        std::min(req.alpha * req.m, req.pool_ids.size());
    std::vector<std::size_t> candidates =
        detail::top_uncertain_rows(req, candidate_count, UncertaintyMeasure::entropy);

    SelectionRequest inner;
    inner.m = req.m;
    inner.seed = req.seed;
    inner.iteration_index = req.iteration_index;
    for (std::size_t row : candidates) inner.pool_ids.push_back(req.pool_ids[row]);
    const Matrix candidate_en = req.en->take_rows(candidates);
    Selection out = sample_representative(inner, candidate_en);
    out.candidate_ids = std::move(inner.pool_ids);
    return out;
}

/// Cluster into m groups, then take each cluster's most uncertain member.
inline Selection sample_cluster_uncertainty(const SelectionRequest& req, bool use_encoder) {
    detail::check_request(req, use_encoder, true, true);
    const Matrix& embeddings = use_encoder ? *req.en : *req.sc;
    if (use_encoder && req.en->rows() != req.pool_ids.size())
        throw std::invalid_argument("selection: encoder matrix not aligned to pool");
    const ClusterModel model = kmeans(embeddings, req.m, req.seed);

    std::vector<std::size_t> pick(req.m, req.pool_ids.size());
    std::vector<double> best(req.m, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < req.pool_ids.size(); ++i) {
        const std::size_t c = model.assignment[i];
        const double u = detail::uncertainty_of(req.sc->row(i), req.clun_measure);
        if (u > best[c] || (u == best[c] && pick[c] < req.pool_ids.size() &&
                            req.pool_ids[i] < req.pool_ids[pick[c]])) {
            best[c] = u;
            pick[c] = i;
        }
    }
    Selection out;
    for (std::size_t c = 0; c < req.m; ++c) {
        out.chosen_ids.push_back(req.pool_ids[pick[c]]);
        out.rationale.emplace_back("cluster " + std::to_string(c) + ", uncertainty " +
                                   detail::format_value(best[c]));
    }
    return out;
}

inline Selection select(Strategy strategy, const SelectionRequest& req) {
    switch (strategy) {
        case Strategy::random: return sample_random(req);
        case Strategy::rep_en: return sample_representative(req, true);
        case Strategy::rep_sc: return sample_representative(req, false);
        case Strategy::un: return sample_uncertainty(req);
        case Strategy::unrep: return sample_uncertainty_representative(req);
        case Strategy::clun_en: return sample_cluster_uncertainty(req, true);
        case Strategy::clun_sc: return sample_cluster_uncertainty(req, false);
    }
    throw std::logic_error("select: unhandled strategy");
}

}  // namespace afsl
