#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "afsl/dataset.hpp"
#include "afsl/matrix.hpp"

namespace afsl {

inline constexpr const char* kProtocolVersion = "afsl/1";

struct SupportEntry {
    SampleId id = 0;
    LabelIndexSet labels;
};

/// One training/inference round. The trainer fine-tunes a fresh model on the
/// support set (pre-trained state when it is empty), returns embeddings and
/// class-restricted logits for every pool id, and predictions for every
/// evaluation id. Validation ids are advisory (model selection).
struct TrainRequest {
    std::string request_id;
    std::size_t iteration = 0;
    std::vector<SupportEntry> support;
    std::vector<SampleId> pool_ids;
    std::vector<SampleId> validation_ids;
    std::vector<SampleId> evaluation_ids;
    LabelSet label_set;
};

struct SampleInference {
    SampleId id = 0;
    std::vector<double> en;  // pooled encoder vector, d reals
    Matrix logits;           // T x N, already restricted to class tokens
};

struct PhaseTimings {
    double fine_tune_seconds = 0.0;
    double inference_seconds = 0.0;
};

struct TrainerResponse {
    std::string request_id;
    bool cold_start = false;
    PhaseTimings timings;
    std::vector<SampleInference> pool_inference;                   // one per pool id
    std::vector<std::pair<SampleId, LabelIndexSet>> predictions;   // one per evaluation id
};

class Trainer {
public:
    virtual ~Trainer() = default;
    virtual TrainerResponse run(const TrainRequest& request) = 0;
};

/// Nearest-prototype stand-in for a real fine-tuned model. Samples must carry
/// their feature vector in the text payload. Prototypes are the per-class
/// means of the support features (classes unseen in the support set fall back
/// to the global support mean); logits are negative squared distances over a
/// temperature, emitted at a single output position. With an empty support
/// set every logit is zero (uniform scores) and the response is flagged
/// cold-start.
class PrototypeTrainer : public Trainer {
public:
    PrototypeTrainer(const DatasetSplits& dataset, double temperature = 1.0)
        : dataset_(dataset), temperature_(temperature) {
        if (!(temperature > 0.0))
            throw std::invalid_argument("PrototypeTrainer: temperature must be positive");
    }

    TrainerResponse run(const TrainRequest& request) override {
        using clock = std::chrono::steady_clock;
        TrainerResponse response;
        response.request_id = request.request_id;

        const std::size_t num_classes = request.label_set.size();
        const auto t0 = clock::now();

        // "Fine-tuning": recompute prototypes from scratch on the support set.
        std::vector<std::vector<long double>> sums(num_classes);
        std::vector<std::size_t> counts(num_classes, 0);
        std::vector<long double> global_sum;
        std::size_t dim = 0;
        for (const auto& entry : request.support) {
            const std::vector<double> x = features_of(entry.id);
            if (dim == 0) {
                dim = x.size();
                global_sum.assign(dim, 0.0L);
                for (auto& s : sums) s.assign(dim, 0.0L);
            } else if (x.size() != dim) {
                throw std::invalid_argument("PrototypeTrainer: inconsistent feature dimensions");
            }
            for (std::size_t j = 0; j < dim; ++j) global_sum[j] += x[j];
            for (int label : entry.labels) {
                ++counts[static_cast<std::size_t>(label)];
                for (std::size_t j = 0; j < dim; ++j)
                    sums[static_cast<std::size_t>(label)][j] += x[j];
            }
        }
        response.cold_start = request.support.empty();

        Matrix prototypes;
        if (!response.cold_start) {
            prototypes = Matrix(num_classes, dim);
            std::vector<double> global_mean(dim);
            for (std::size_t j = 0; j < dim; ++j)
                global_mean[j] = static_cast<double>(
                    global_sum[j] / static_cast<long double>(request.support.size()));
            for (std::size_t c = 0; c < num_classes; ++c) {
                for (std::size_t j = 0; j < dim; ++j)
                    prototypes(c, j) = counts[c] == 0
                                           ? global_mean[j]
                                           : static_cast<double>(
                                                 sums[c][j] / static_cast<long double>(counts[c]));
            }
        }
        const auto t1 = clock::now();

        for (SampleId id : request.pool_ids)
            response.pool_inference.push_back(infer(id, prototypes, response.cold_start, num_classes));
        for (SampleId id : request.evaluation_ids) {
            const SampleInference inf = infer(id, prototypes, response.cold_start, num_classes);
            int best = 0;
            for (std::size_t c = 1; c < num_classes; ++c)
                if (inf.logits(0, c) > inf.logits(0, static_cast<std::size_t>(best)))
                    best = static_cast<int>(c);  // ties keep the lower index
            response.predictions.emplace_back(id, LabelIndexSet{best});
        }
        const auto t2 = clock::now();

        response.timings.fine_tune_seconds = std::chrono::duration<double>(t1 - t0).count();
        response.timings.inference_seconds = std::chrono::duration<double>(t2 - t1).count();
        return response;
    }

private:
    std::vector<double> features_of(SampleId id) const {
        auto it = feature_cache_.find(id);
        if (it != feature_cache_.end()) return it->second;
        const std::vector<double> x = decode_features(dataset_.by_id(id).text);
        if (x.empty())
            throw std::invalid_argument("PrototypeTrainer: sample " + std::to_string(id) +
                                        " carries no feature vector");
        feature_cache_.emplace(id, x);
        return x;
    }

    SampleInference infer(SampleId id, const Matrix& prototypes, bool cold_start,
                          std::size_t num_classes) const {
        SampleInference out;
        out.id = id;
        out.en = features_of(id);
        out.logits = Matrix(1, num_classes, 0.0);
        if (!cold_start) {
            if (out.en.size() != prototypes.cols())
                throw std::invalid_argument("PrototypeTrainer: sample " + std::to_string(id) +
                                            " feature dimension mismatch");
            for (std::size_t c = 0; c < num_classes; ++c)
                out.logits(0, c) =
                    -squared_distance(std::span<const double>(out.en), prototypes.row(c)) /
                    temperature_;
        }
        return out;
    }

    const DatasetSplits& dataset_;
    double temperature_;
    mutable std::unordered_map<SampleId, std::vector<double>> feature_cache_;
};

}  // namespace afsl
