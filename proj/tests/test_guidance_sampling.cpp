#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cdk/gmm.hpp"
#include "cdk/sampling.hpp"

using namespace cdk;

namespace {

PromptEmbedding fake_cond() {
    PromptEmbedding e = PromptEmbedding::null_embedding();
    e.null_flag = false;
    e.n_tokens = 1;
    return e;
}

// Moment error of sampled chains against a known Gaussian target.
double moment_error(const std::vector<TensorF>& samples, const std::vector<double>& m,
                    double iso_var) {
    const std::size_t n = samples.size();
    const int d = static_cast<int>(m.size());
    std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
    for (const auto& s : samples)
        for (int i = 0; i < d; ++i) mean[static_cast<std::size_t>(i)] += s[static_cast<std::size_t>(i)] / static_cast<double>(n);
    std::vector<double> cov(static_cast<std::size_t>(d * d), 0.0);
    for (const auto& s : samples)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                cov[static_cast<std::size_t>(i * d + j)] +=
                    (s[static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(i)]) *
                    (s[static_cast<std::size_t>(j)] - mean[static_cast<std::size_t>(j)]) /
                    static_cast<double>(n);
    double err = 0.0;
    for (int i = 0; i < d; ++i)
        err = std::max(err, std::fabs(mean[static_cast<std::size_t>(i)] - m[static_cast<std::size_t>(i)]));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            err = std::max(err, std::fabs(cov[static_cast<std::size_t>(i * d + j)] -
                                          (i == j ? iso_var : 0.0)));
    return err;
}

}  // namespace

TEST_CASE("cfg_combine formula and affine property") {
    RngStream rng(41, 0);
    const TensorF a = rng.normal_tensor({8});
    const TensorF b = rng.normal_tensor({8});

    CHECK(max_abs_diff(cfg_combine(a, b, 1.0), a) == 0.0);
    CHECK(max_abs_diff(cfg_combine(a, b, 0.0), b) == 0.0);
    CHECK(max_abs_diff(cfg_combine(a, a, 7.5), a) <= 1e-6);

    // cfg(a,b,w) + cfg(b,a,w) = a + b
    const TensorF lhs = add(cfg_combine(a, b, 3.0), cfg_combine(b, a, 3.0));
    CHECK(max_abs_diff(lhs, add(a, b)) <= 1e-5);

    CHECK_THROWS_AS(cfg_combine(a, TensorF::zeros({4}), 1.0), std::invalid_argument);
}

TEST_CASE("static threshold") {
    TensorF x({4}, {0.5f, 2.0f, -3.5f, -0.9f});
    const TensorF y = static_threshold(x);
    CHECK(y[0] == 0.5f);
    CHECK(y[1] == 1.0f);
    CHECK(y[2] == -1.0f);
    CHECK(y[3] == -0.9f);
    CHECK(max_abs_diff(static_threshold(y), y) == 0.0);  // idempotent

    // in-range input untouched, ordering preserved
    RngStream rng(43, 0);
    TensorF in(std::vector<int>{32});
    for (std::size_t i = 0; i < in.size(); ++i) in[i] = static_cast<float>(rng.uniform() * 2 - 1);
    CHECK(max_abs_diff(static_threshold(in), in) == 0.0);
}

TEST_CASE("dynamic threshold") {
    // all |x| <= 1 with p=100: s = max(1,1) = 1, identity
    TensorF in({3}, {0.2f, -0.7f, 1.0f});
    CHECK(max_abs_diff(dynamic_threshold(in, 100.0), in) == 0.0);

    // hand evaluation: x=[0,2], p=100 -> s=2 -> [0,1]
    TensorF x({2}, {0.0f, 2.0f});
    const TensorF y = dynamic_threshold(x, 100.0);
    CHECK(y[0] == 0.0f);
    CHECK(y[1] == 1.0f);

    // p=99.5 bounds arbitrary input into [-1,1]; idempotent on the result
    RngStream rng(47, 0);
    TensorF wild(std::vector<int>{3, 8, 8});
    for (std::size_t i = 0; i < wild.size(); ++i) wild[i] = rng.normal_f() * 10.0f;
    const TensorF out = dynamic_threshold(wild, 99.5);
    CHECK(max_abs(out) <= 1.0f);
    const TensorF twice = dynamic_threshold(out, 99.5);
    CHECK(max_abs_diff(twice, out) <= 1e-6);

    CHECK_THROWS_AS(dynamic_threshold(x, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(dynamic_threshold(x, 101.0), std::invalid_argument);
}

TEST_CASE("ddim step carries the same eps down the schedule") {
    const Schedule sched = Schedule::cosine();
    RngStream rng(53, 0);
    const TensorF x = rng.normal_tensor({6});
    const TensorF e = rng.normal_tensor({6});
    const double t = 0.8, s = 0.5;
    const NoiseLevel lt = level_at(sched, t);
    const NoiseLevel ls = level_at(sched, s);
    const TensorF z_t = forward_marginal(x, lt, e);
    const TensorF z_s = ddim_step(z_t, x, s, t, sched);
    CHECK(max_abs_diff(z_s, forward_marginal(x, ls, e)) <= 1e-5);

    // s -> t leaves z unchanged
    const TensorF near = ddim_step(z_t, x, t - 1e-9, t, sched);
    CHECK(max_abs_diff(near, z_t) <= 1e-5);

    CHECK_THROWS_AS(ddim_step(z_t, x, 0.9, 0.5, sched), std::invalid_argument);
}

TEST_CASE("ancestral step: gamma endpoints and dual formula at 0.5") {
    const Schedule sched = Schedule::cosine();
    RngStream rng(59, 0);
    const TensorF z_t = rng.normal_tensor({5});
    const TensorF x = rng.normal_tensor({5});
    const double s = 0.45, t = 0.7;

    // gamma=0, eps=0: pure posterior mean
    const TensorF mean_step = ancestral_step(z_t, x, s, t, 0.0, sched, TensorF::zeros({5}));
    const PosteriorParams post = posterior_params(z_t, x, s, t, sched);
    CHECK(max_abs_diff(mean_step, post.mu) == 0.0);

    // gamma=0.5 noise std against an independently coded formula
    const TensorF ones = TensorF::full({5}, 1.0f);
    const TensorF stepped = ancestral_step(z_t, x, s, t, 0.5, sched, ones);
    const double tvar = transition_var(sched, s, t);
    const double sd = std::sqrt(std::pow(post.var, 0.5) * std::pow(tvar, 0.5));
    for (std::size_t i = 0; i < stepped.size(); ++i)
        CHECK(stepped[i] == doctest::Approx(post.mu[i] + sd).epsilon(1e-5));

    // degenerate s -> t: z_t unchanged, zero added noise
    const TensorF near = ancestral_step(z_t, z_t, t - 1e-9, t, 1.0, sched, ones);
    CHECK(max_abs_diff(near, z_t) <= 1e-4);
}

TEST_CASE("oracle ddim sampling matches a known gaussian and improves with steps") {
    const Schedule sched = Schedule::cosine();
    const std::vector<double> target_mean = {0.4, -0.3};
    const double target_var = 0.25;
    const GmmDenoiser oracle(GmmSpec::single(target_mean, target_var));

    GuidanceConfig guidance;  // w=1, no threshold
    SamplerConfig coarse{SamplerKind::Ddim, 8, 0.0};
    SamplerConfig fine{SamplerKind::Ddim, 128, 0.0};

    const int chains = 2000;
    const auto coarse_samples = sample_batch(oracle, PromptEmbedding::null_embedding(), sched,
                                             coarse, guidance, {2}, chains, 101, 0);
    const auto fine_samples = sample_batch(oracle, PromptEmbedding::null_embedding(), sched,
                                           fine, guidance, {2}, chains, 101, 0);
    const double err_coarse = moment_error(coarse_samples, target_mean, target_var);
    const double err_fine = moment_error(fine_samples, target_mean, target_var);
    CHECK(err_fine < 0.08);
    CHECK(err_fine < err_coarse);
}

TEST_CASE("sample determinism and threshold postcondition") {
    const Schedule sched = Schedule::cosine();
    const GmmDenoiser oracle(GmmSpec::single({1.6, -1.2}, 0.1));
    SamplerConfig sc{SamplerKind::Ancestral, 24, 0.3};
    GuidanceConfig gc;
    gc.w = 2.0;
    gc.threshold = ThresholdMode::Dynamic;
    gc.p = 99.5;

    RngStream r1(77, 5), r2(77, 5);
    const TensorF a = sample(oracle, fake_cond(), sched, sc, gc, {2}, r1);
    const TensorF b = sample(oracle, fake_cond(), sched, sc, gc, {2}, r2);
    CHECK(max_abs_diff(a, b) == 0.0);  // bitwise identical
    CHECK(a.all_finite());
    CHECK(max_abs(a) <= 1.0f);

    gc.threshold = ThresholdMode::Static;
    RngStream r3(78, 0);
    const TensorF c = sample(oracle, fake_cond(), sched, sc, gc, {2}, r3);
    CHECK(max_abs(c) <= 1.0f);
}

TEST_CASE("sample_batch is independent of thread count") {
    const Schedule sched = Schedule::cosine();
    const GmmDenoiser oracle(GmmSpec::single({0.0, 0.0}, 0.5));
    SamplerConfig sc{SamplerKind::Ancestral, 16, 1.0};
    GuidanceConfig gc;

    setenv("CDK_THREADS", "1", 1);
    const auto serial = sample_batch(oracle, PromptEmbedding::null_embedding(), sched, sc, gc,
                                     {2}, 16, 5, 100);
    setenv("CDK_THREADS", "2", 1);
    const auto parallel = sample_batch(oracle, PromptEmbedding::null_embedding(), sched, sc, gc,
                                       {2}, 16, 5, 100);
    unsetenv("CDK_THREADS");
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i)
        CHECK(max_abs_diff(serial[i], parallel[i]) == 0.0);
}

TEST_CASE("conditioning augmentation") {
    const Schedule sched = Schedule::cosine();
    RngStream rng(83, 0);
    TensorF x(std::vector<int>{3, 4, 4});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.uniform() * 2 - 1);

    // aug=0: output equals the input within the schedule clamp
    const TensorF same = apply_cond_aug(x, AugLevel(0.0), sched, rng);
    CHECK(max_abs_diff(same, x) <= 0.02);

    // aug=1: correlation with the input vanishes over many draws
    double num = 0.0, nx = 0.0, ny = 0.0;
    const int draws = 2000;
    for (int i = 0; i < draws; ++i) {
        const TensorF noisy = apply_cond_aug(x, AugLevel(1.0), sched, rng);
        for (std::size_t j = 0; j < x.size(); ++j) {
            num += static_cast<double>(x[j]) * noisy[j];
            nx += static_cast<double>(x[j]) * x[j];
            ny += static_cast<double>(noisy[j]) * noisy[j];
        }
    }
    CHECK(std::fabs(num / std::sqrt(nx * ny)) < 0.01);

    // sweeping aug changes the output at a fixed seed
    RngStream r1(9, 9), r2(9, 9);
    const TensorF a = apply_cond_aug(x, AugLevel(0.1), sched, r1);
    const TensorF b = apply_cond_aug(x, AugLevel(0.3), sched, r2);
    CHECK(max_abs_diff(a, b) > 1e-3);

    CHECK_THROWS_AS(AugLevel(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(AugLevel(1.1), std::invalid_argument);
}
