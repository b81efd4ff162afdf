#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cdk/schedule.hpp"

using namespace cdk;

// Brute-force 1000-term product for the linear schedule at t=1, computed with
// an independent loop (betas spaced linearly in [1e-4, 0.02]) and frozen here.
constexpr double kLinearAlphaBarAtOne = 4.035829765375694e-05;

TEST_CASE("cosine boundaries") {
    const Schedule sched = Schedule::cosine();
    const NoiseLevel lv0 = level_at(sched, 0.0);
    CHECK(lv0.alpha == doctest::Approx(1.0).epsilon(1e-5));  // within the endpoint clamp
    CHECK(lv0.sigma < 1.1e-3);
    CHECK(lv0.lambda > 10.0);

    const NoiseLevel lv1 = level_at(sched, 1.0);
    CHECK(lv1.alpha < 1.1e-3);
    CHECK(lv1.sigma == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(lv1.lambda < -10.0);
}

TEST_CASE("cosine closed form at interior points") {
    const Schedule sched = Schedule::cosine();
    const double s = Schedule::kCosineOffset;
    for (const double t : {0.1, 0.25, 0.5, 0.75, 0.9}) {
        const double num = std::cos(M_PI / 2 * (t + s) / (1 + s));
        const double den = std::cos(M_PI / 2 * s / (1 + s));
        const double a2 = num * num / (den * den);
        const NoiseLevel lv = level_at(sched, t);
        CHECK(lv.alpha * lv.alpha == doctest::Approx(a2).epsilon(1e-12));
    }
}

TEST_CASE("linear alpha_bar product at t=1 matches the independent loop") {
    const Schedule sched = Schedule::linear();
    const NoiseLevel lv = level_at(sched, 1.0);
    CHECK(lv.alpha * lv.alpha == doctest::Approx(kLinearAlphaBarAtOne).epsilon(1e-12));
}

TEST_CASE("linear knots match the discrete cumulative product") {
    const Schedule sched = Schedule::linear();
    // Independent partial products at a few grid knots.
    for (const int knot : {1, 10, 500, 999}) {
        double log_ab = 0.0;
        for (int i = 1; i <= knot; ++i) {
            const double beta = 1e-4 + (0.02 - 1e-4) * (i - 1) / 999.0;
            log_ab += std::log(1.0 - beta);
        }
        const NoiseLevel lv = level_at(sched, knot / 1000.0);
        CHECK(std::log(lv.alpha * lv.alpha) == doctest::Approx(log_ab).epsilon(1e-9));
    }
}

TEST_CASE("variance preserving identity on a 1000-point grid") {
    for (const Schedule& sched : {Schedule::cosine(), Schedule::linear()}) {
        for (int i = 0; i < 1000; ++i) {
            const double t = i / 999.0;
            const NoiseLevel lv = level_at(sched, t);
            CHECK(std::fabs(lv.alpha * lv.alpha + lv.sigma * lv.sigma - 1.0) <= 1e-6);
        }
    }
}

TEST_CASE("lambda strictly decreasing on a 1000-point grid") {
    for (const Schedule& sched : {Schedule::cosine(), Schedule::linear()}) {
        double prev = level_at(sched, 0.0).lambda;
        for (int i = 1; i < 1000; ++i) {
            const double lam = level_at(sched, i / 999.0).lambda;
            CHECK(lam < prev);
            prev = lam;
        }
    }
}

TEST_CASE("lambda consistent with alpha/sigma") {
    for (const Schedule& sched : {Schedule::cosine(), Schedule::linear()}) {
        for (int i = 0; i <= 20; ++i) {
            const NoiseLevel lv = level_at(sched, i / 20.0);
            const double lam = std::log(lv.alpha * lv.alpha / (lv.sigma * lv.sigma));
            CHECK(std::fabs(lam - lv.lambda) <= 1e-5);
        }
    }
}

TEST_CASE("level_at is pure") {
    const Schedule sched = Schedule::cosine();
    const NoiseLevel a = level_at(sched, 0.37);
    const NoiseLevel b = level_at(sched, 0.37);
    CHECK(a.alpha == b.alpha);
    CHECK(a.sigma == b.sigma);
    CHECK(a.lambda == b.lambda);
}

TEST_CASE("domain errors") {
    const Schedule sched = Schedule::cosine();
    CHECK_THROWS_AS(level_at(sched, -0.01), std::invalid_argument);
    CHECK_THROWS_AS(level_at(sched, 1.01), std::invalid_argument);
    CHECK_THROWS_AS(transition_var(sched, 0.5, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(transition_var(sched, 0.7, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(Schedule::linear(0.02, 0.0001, 1000), std::invalid_argument);
    CHECK_THROWS_AS(Schedule::linear(1e-4, 0.02, 1), std::invalid_argument);
}

TEST_CASE("transition variance is nonnegative and vanishes as s -> t") {
    for (const Schedule& sched : {Schedule::cosine(), Schedule::linear()}) {
        for (int i = 0; i < 50; ++i)
            for (int j = i + 1; j <= 50; ++j) {
                const double s = i / 50.0, t = j / 50.0;
                CHECK(transition_var(sched, s, t) >= 0.0);
            }
        CHECK(transition_var(sched, 0.5, 0.5 + 1e-9) < 1e-6);
        // shrinking gap drives the variance to zero
        double prev = transition_var(sched, 0.5, 0.6);
        for (const double eps : {1e-2, 1e-4, 1e-6}) {
            const double v = transition_var(sched, 0.5, 0.5 + eps);
            CHECK(v < prev);
            prev = v;
        }
    }
}
