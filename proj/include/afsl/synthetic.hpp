#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "afsl/dataset.hpp"
#include "afsl/matrix.hpp"
#include "afsl/rng.hpp"

namespace afsl {

/// Gaussian-mixture dataset description. Class counts are exact by
/// construction, so label imbalance (and thus U) is controlled precisely.
struct MixtureSpec {
    std::size_t num_classes = 0;
    std::size_t dimension = 0;
    Matrix class_means;  // num_classes x dimension
    double sigma = 1.0;
    std::vector<std::size_t> train_counts;       // per class
    std::vector<std::size_t> validation_counts;  // per class
    std::vector<std::size_t> test_counts;        // per class
    std::uint64_t seed = 0;

    void validate() const {
        if (num_classes < 2) throw std::invalid_argument("MixtureSpec: need at least 2 classes");
        if (dimension == 0) throw std::invalid_argument("MixtureSpec: dimension must be positive");
        if (!(sigma >= 0.0)) throw std::invalid_argument("MixtureSpec: sigma must be >= 0");
        if (class_means.rows() != num_classes || class_means.cols() != dimension)
            throw std::invalid_argument("MixtureSpec: class_means must be num_classes x dimension");
        for (std::size_t a = 0; a < num_classes; ++a)
            for (std::size_t b = a + 1; b < num_classes; ++b)
                if (class_means.row(a).size() == class_means.row(b).size() &&
                    std::equal(class_means.row(a).begin(), class_means.row(a).end(),
                               class_means.row(b).begin()))
                    throw std::invalid_argument("MixtureSpec: class means must be distinct");
        for (const auto* counts : {&train_counts, &validation_counts, &test_counts}) {
            if (counts->size() != num_classes)
                throw std::invalid_argument("MixtureSpec: counts must have one entry per class");
            for (std::size_t c : *counts)
                if (c == 0) throw std::invalid_argument("MixtureSpec: counts must be >= 1");
        }
    }
};

/// Class means on a circle of the given radius in the first two dimensions
/// (equally spaced angles); for 1-D data, means sit at 0, sep, 2*sep, ...
inline Matrix circle_means(std::size_t num_classes, std::size_t dimension, double separation) {
    Matrix means(num_classes, dimension);
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (dimension == 1) {
            means(c, 0) = separation * static_cast<double>(c);
        } else {
            const double angle =
                2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(num_classes);
            means(c, 0) = separation * std::cos(angle);
            means(c, 1) = separation * std::sin(angle);
        }
    }
    return means;
}

/// Draws the dataset. Deterministic in the spec: each (split, class) pair has
/// its own derived generator stream, so generation order never matters.
inline DatasetSplits generate(const MixtureSpec& spec) {
    spec.validate();

    DatasetSplits ds;
    for (std::size_t c = 0; c < spec.num_classes; ++c)
        ds.label_set.labels.push_back("class" + std::to_string(c));
    ds.label_set.multi_label = false;

    SampleId next_id = 0;
    const std::vector<std::size_t>* split_counts[3] = {&spec.train_counts,
                                                       &spec.validation_counts, &spec.test_counts};
    std::vector<Sample>* split_out[3] = {&ds.train, &ds.validation, &ds.test};

    for (std::size_t split = 0; split < 3; ++split) {
        for (std::size_t c = 0; c < spec.num_classes; ++c) {
            Rng rng(mix_seed(spec.seed, split, c));
            const auto mean = spec.class_means.row(c);
            for (std::size_t i = 0; i < (*split_counts[split])[c]; ++i) {
                std::vector<double> x(spec.dimension);
                for (std::size_t j = 0; j < spec.dimension; ++j)
                    x[j] = mean[j] + spec.sigma * rng.gaussian();
                Sample s;
                s.id = next_id++;
                s.text = encode_features(x);
                s.gold_labels = {static_cast<int>(c)};
                split_out[split]->push_back(std::move(s));
            }
        }
    }
    return ds;
}

}  // namespace afsl
