#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "afsl/matrix.hpp"
#include "afsl/parallel.hpp"
#include "afsl/rng.hpp"

namespace afsl {

struct ClusterModel {
    Matrix centroids;                      // k x d
    std::vector<std::size_t> assignment;   // point index -> cluster id
    double inertia = 0.0;                  // sum of squared distances to assigned centroids
    std::vector<double> inertia_per_iteration;
};

struct KmeansOptions {
    double relative_tolerance = 1e-4;
    std::size_t max_iterations = 100;
    unsigned num_threads = 1;
};

namespace detail {

inline Matrix kmeans_plus_plus_init(const Matrix& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.rows();
    Matrix centroids(k, points.cols());
    std::vector<bool> chosen(n, false);

    std::size_t first = static_cast<std::size_t>(rng.bounded(n));
    centroids.set_row(0, points.row(first));
    chosen[first] = true;

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points.row(i), points.row(first));

    for (std::size_t c = 1; c < k; ++c) {
        long double total = 0.0L;
        for (double v : d2) total += v;
        std::size_t pick;
        if (total > 0.0L) {
            pick = rng.weighted_index(d2);
        } else {
            // all remaining points coincide with chosen centroids
            pick = 0;
            while (pick < n && chosen[pick]) ++pick;
            if (pick == n) pick = 0;
        }
        chosen[pick] = true;
        centroids.set_row(c, points.row(pick));
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], squared_distance(points.row(i), points.row(pick)));
    }
    return centroids;
}

/// Reseeds every empty cluster to the point farthest from its assigned
/// centroid (ties toward the lowest point index), stealing only from
/// clusters that keep at least one member. Guarantees k non-empty clusters.
inline bool repair_empty_clusters(const Matrix& points, Matrix& centroids,
                                  std::vector<std::size_t>& assignment,
                                  std::vector<double>& assigned_d2) {
    const std::size_t k = centroids.rows();
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t a : assignment) ++counts[a];

    bool repaired = false;
    for (std::size_t e = 0; e < k; ++e) {
        if (counts[e] != 0) continue;
        std::size_t farthest = points.rows();
        double best = -1.0;
        for (std::size_t i = 0; i < points.rows(); ++i) {
            if (counts[assignment[i]] < 2) continue;  // would empty another cluster
            if (assigned_d2[i] > best) {
                best = assigned_d2[i];
                farthest = i;
            }
        }
        assert(farthest < points.rows());  // pigeonhole: k <= n guarantees a donor
        --counts[assignment[farthest]];
        assignment[farthest] = e;
        counts[e] = 1;
        centroids.set_row(e, points.row(farthest));
        assigned_d2[farthest] = 0.0;
        repaired = true;
    }
    return repaired;
}

}  // namespace detail

/// Lloyd's algorithm from k-means++ initialization. Deterministic in
/// (points, k, seed): the assignment step fans out over points but each point
/// writes only its own slot, and all reductions (centroid sums, inertia) run
/// serially in point order, so any thread count gives bit-identical output.
inline ClusterModel kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                           const KmeansOptions& options = {}) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    if (k == 0) throw std::invalid_argument("kmeans: k must be positive");
    if (k > n)
        throw std::invalid_argument("kmeans: k = " + std::to_string(k) + " exceeds " +
                                    std::to_string(n) + " points");
    for (double v : points.data())
        if (!std::isfinite(v)) throw std::invalid_argument("kmeans: non-finite input");

    Rng rng(mix_seed(seed));
    ClusterModel model;
    model.centroids = detail::kmeans_plus_plus_init(points, k, rng);
    model.assignment.assign(n, 0);

    std::vector<double> assigned_d2(n, 0.0);
    std::vector<std::size_t> prev_assignment;
    double prev_inertia = std::numeric_limits<double>::infinity();

    for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
        // Assignment: nearest centroid, distance ties toward the lower id.
        parallel_for(n, options.num_threads, [&](std::size_t i) {
            std::size_t best_c = 0;
            double best_d = squared_distance(points.row(i), model.centroids.row(0));
            for (std::size_t c = 1; c < k; ++c) {
                const double dist = squared_distance(points.row(i), model.centroids.row(c));
                if (dist < best_d) {
                    best_d = dist;
                    best_c = c;
                }
            }
            model.assignment[i] = best_c;
            assigned_d2[i] = best_d;
        });

        const bool repaired =
            detail::repair_empty_clusters(points, model.centroids, model.assignment, assigned_d2);

        long double sse = 0.0L;
        for (std::size_t i = 0; i < n; ++i) sse += assigned_d2[i];
        const double inertia = static_cast<double>(sse);
        model.inertia_per_iteration.push_back(inertia);
        assert(inertia <= prev_inertia * (1.0 + 1e-12) + 1e-12);
        model.inertia = inertia;

        const bool cycling = repaired && prev_assignment == model.assignment &&
                             inertia == prev_inertia;
        bool converged = false;
        if (inertia == 0.0) {
            converged = true;
        } else if (!repaired && std::isfinite(prev_inertia)) {
            converged = (prev_inertia - inertia) <= options.relative_tolerance * prev_inertia;
        }
        if (converged || cycling || iter + 1 == options.max_iterations) break;

        prev_assignment = model.assignment;
        prev_inertia = inertia;

        // Update: centroid = mean of members. Serial accumulation in point
        // order (long double) per the determinism contract.
        std::vector<long double> sums(k * d, 0.0L);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = model.assignment[i];
            ++counts[c];
            const auto row = points.row(i);
            for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += row[j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            assert(counts[c] > 0);
            for (std::size_t j = 0; j < d; ++j)
                model.centroids(c, j) =
                    static_cast<double>(sums[c * d + j] / static_cast<long double>(counts[c]));
        }
    }
    return model;
}

/// For each cluster, the member index closest (Euclidean) to its centroid;
/// distance ties toward the lowest point index. k distinct indices.
inline std::vector<std::size_t> nearest_to_centroids(const ClusterModel& model,
                                                     const Matrix& points) {
    const std::size_t k = model.centroids.rows();
    std::vector<std::size_t> best_idx(k, points.rows());
    std::vector<double> best_d(k, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        const std::size_t c = model.assignment[i];
        const double dist = squared_distance(points.row(i), model.centroids.row(c));
        if (dist < best_d[c]) {
            best_d[c] = dist;
            best_idx[c] = i;
        }
    }
    for (std::size_t c = 0; c < k; ++c)
        if (best_idx[c] >= points.rows())
            throw std::logic_error("nearest_to_centroids: cluster " + std::to_string(c) +
                                   " has no members");
    return best_idx;
}

}  // namespace afsl
