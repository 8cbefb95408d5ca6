#include <cmath>
#include <limits>

#include <catch2/catch_amalgamated.hpp>

#include "afsl/rng.hpp"
#include "afsl/scoring.hpp"

using namespace afsl;
using Catch::Matchers::WithinAbs;

namespace {

// Straightforward-loop reference for the whole pipeline, in extended
// precision and without the max-subtraction trick. Test-only.
std::vector<long double> oracle_softmax_row(std::span<const double> logits) {
    long double sum = 0.0L;
    std::vector<long double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(static_cast<long double>(logits[i]));
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

Matrix random_logits(Rng& rng, std::size_t t, std::size_t n, double low, double high) {
    Matrix m(t, n);
    for (auto& v : m.data()) v = low + (high - low) * rng.uniform();
    return m;
}

}  // namespace

TEST_CASE("mean pooling") {
    SECTION("single masked row passes through") {
        TokenMatrix tm{Matrix{{1.5, -2.0, 3.0}}, {true}};
        CHECK(mean_pool(tm) == std::vector<double>{1.5, -2.0, 3.0});
    }
    SECTION("two masked rows average") {
        TokenMatrix tm{Matrix{{1.0, 3.0}, {3.0, 1.0}}, {true, true}};
        CHECK(mean_pool(tm) == std::vector<double>{2.0, 2.0});
    }
    SECTION("masked-out rows are ignored") {
        TokenMatrix tm{Matrix{{1.0, 1.0}, {9.0, 9.0}}, {true, false}};
        CHECK(mean_pool(tm) == std::vector<double>{1.0, 1.0});
    }
    SECTION("all-false mask is an error") {
        TokenMatrix tm{Matrix{{1.0}}, {false}};
        CHECK_THROWS_AS(mean_pool(tm), std::invalid_argument);
    }
}

TEST_CASE("class softmax basics") {
    SECTION("equal logits give the uniform row") {
        const Matrix p = class_softmax(Matrix{{3.0, 3.0, 3.0, 3.0}});
        for (std::size_t n = 0; n < 4; ++n) CHECK_THAT(p(0, n), WithinAbs(0.25, 1e-15));
    }
    SECTION("(0, ln 2, ln 3) maps to (1/6, 2/6, 3/6)") {
        const Matrix p = class_softmax(Matrix{{0.0, std::log(2.0), std::log(3.0)}});
        CHECK_THAT(p(0, 0), WithinAbs(1.0 / 6.0, 1e-12));
        CHECK_THAT(p(0, 1), WithinAbs(2.0 / 6.0, 1e-12));
        CHECK_THAT(p(0, 2), WithinAbs(3.0 / 6.0, 1e-12));
    }
    SECTION("huge logits stay finite and match the closed form") {
        const Matrix p = class_softmax(Matrix{{1000.0, 1001.0}});
        CHECK(std::isfinite(p(0, 0)));
        const double e1 = std::exp(-1.0);
        CHECK_THAT(p(0, 0), WithinAbs(e1 / (1.0 + e1), 1e-12));
        CHECK_THAT(p(0, 1), WithinAbs(1.0 / (1.0 + e1), 1e-12));
    }
    SECTION("non-finite input is rejected") {
        CHECK_THROWS_AS(class_softmax(Matrix{{1.0, std::numeric_limits<double>::infinity()}}),
                        std::invalid_argument);
        CHECK_THROWS_AS(class_softmax(Matrix{{std::nan(""), 0.0}}), std::invalid_argument);
    }
}

TEST_CASE("class softmax rows sum to one and are shift-invariant") {
    Rng rng(11);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t t = 1 + rng.bounded(8);
        const std::size_t n = 2 + rng.bounded(7);
        const Matrix logits = random_logits(rng, t, n, -20.0, 20.0);
        const Matrix p = class_softmax(logits);

        Matrix shifted = logits;
        const double shift = -50.0 + 100.0 * rng.uniform();
        for (auto& v : shifted.data()) v += shift;
        const Matrix p2 = class_softmax(shifted);

        for (std::size_t r = 0; r < t; ++r) {
            long double sum = 0.0L;
            for (std::size_t c = 0; c < n; ++c) {
                CHECK(p(r, c) > 0.0);
                sum += p(r, c);
                CHECK_THAT(p2(r, c), WithinAbs(p(r, c), 1e-9));
            }
            CHECK_THAT(static_cast<double>(sum), WithinAbs(1.0, 1e-9));
        }
    }
}

TEST_CASE("score vector is the columnwise maximum") {
    SECTION("worked example") {
        const ScoreVector s = score_vector(Matrix{{0.1, 0.9}, {0.6, 0.4}});
        CHECK(s == ScoreVector{0.6, 0.9});
    }
    SECTION("single row is the identity") {
        const ScoreVector s = score_vector(Matrix{{0.2, 0.5, 0.3}});
        CHECK(s == ScoreVector{0.2, 0.5, 0.3});
    }
    SECTION("random matrix against the loop oracle") {
        Rng rng(5);
        for (int rep = 0; rep < 50; ++rep) {
            Matrix probs(5, 3);
            for (auto& v : probs.data()) v = rng.uniform();
            const ScoreVector s = score_vector(probs);
            for (std::size_t c = 0; c < 3; ++c) {
                double expected = 0.0;
                for (std::size_t r = 0; r < 5; ++r) expected = std::max(expected, probs(r, c));
                CHECK(s[c] == expected);
            }
        }
    }
}

TEST_CASE("score vector is monotone in its inputs") {
    Rng rng(6);
    Matrix probs(4, 3);
    for (auto& v : probs.data()) v = rng.uniform();
    const ScoreVector before = score_vector(probs);
    for (int rep = 0; rep < 100; ++rep) {
        Matrix bumped = probs;
        const std::size_t r = rng.bounded(4), c = rng.bounded(3);
        bumped(r, c) = std::min(1.0, bumped(r, c) + rng.uniform());
        const ScoreVector after = score_vector(bumped);
        for (std::size_t i = 0; i < 3; ++i) CHECK(after[i] >= before[i]);
    }
}

TEST_CASE("entropy") {
    SECTION("uniform two-way is ln 2") {
        CHECK_THAT(entropy(ScoreVector{0.5, 0.5}), WithinAbs(0.6931471805599453, 1e-12));
    }
    SECTION("one-hot is zero") { CHECK(entropy(ScoreVector{1.0, 0.0, 0.0}) == 0.0); }
    SECTION("hand-evaluated (0.25, 0.75)") {
        CHECK_THAT(entropy(ScoreVector{0.25, 0.75}), WithinAbs(0.5623351446188083, 1e-12));
    }
    SECTION("renormalization makes scale irrelevant") {
        CHECK_THAT(entropy(ScoreVector{0.2, 0.6}),
                   WithinAbs(entropy(ScoreVector{0.25, 0.75}), 1e-12));
    }
    SECTION("all-zero vector is an error") {
        CHECK_THROWS_AS(entropy(ScoreVector{0.0, 0.0}), std::invalid_argument);
    }
    SECTION("negative entries are an error") {
        CHECK_THROWS_AS(entropy(ScoreVector{-0.1, 0.5}), std::invalid_argument);
    }
}

TEST_CASE("entropy peaks exactly on uniform inputs and ignores permutation") {
    Rng rng(7);
    for (std::size_t n : {2u, 3u, 6u}) {
        const double peak = entropy(ScoreVector(n, 1.0 / n));
        CHECK_THAT(peak, WithinAbs(std::log(static_cast<double>(n)), 1e-9));
        // uniform inputs of any scale hit the same maximum
        CHECK_THAT(entropy(ScoreVector(n, 0.37)), WithinAbs(peak, 1e-12));
        for (int rep = 0; rep < 50; ++rep) {
            ScoreVector s(n);
            for (auto& v : s) v = 0.01 + rng.uniform();
            CHECK(entropy(s) <= peak + 1e-12);
            ScoreVector shuffled = s;
            for (std::size_t i = n; i > 1; --i)
                std::swap(shuffled[i - 1], shuffled[rng.bounded(i)]);
            CHECK_THAT(entropy(shuffled), WithinAbs(entropy(s), 1e-12));
        }
    }
}

TEST_CASE("single-position single-label score vectors sum to one") {
    Rng rng(8);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 2 + rng.bounded(7);
        const Matrix logits = random_logits(rng, 1, n, -10.0, 10.0);
        const ScoreVector s = scores_from_logits(logits);
        long double sum = 0.0L;
        for (double v : s) sum += v;
        CHECK_THAT(static_cast<double>(sum), WithinAbs(1.0, 1e-9));
    }
}

TEST_CASE("pipeline matches the extended-precision loop oracle") {
    Rng rng(9);
    for (int rep = 0; rep < 300; ++rep) {
        const std::size_t t = 1 + rng.bounded(8);
        const std::size_t n = 2 + rng.bounded(7);
        const Matrix logits = random_logits(rng, t, n, -30.0, 30.0);
        const Matrix p = class_softmax(logits);
        for (std::size_t r = 0; r < t; ++r) {
            const auto expected = oracle_softmax_row(logits.row(r));
            for (std::size_t c = 0; c < n; ++c)
                CHECK_THAT(p(r, c), WithinAbs(static_cast<double>(expected[c]), 1e-9));
        }
    }
}
