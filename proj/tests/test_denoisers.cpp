#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cdk/gmm.hpp"
#include "cdk/prompt.hpp"
#include "cdk/unet.hpp"
#include "cdk/gradcheck.hpp"

using namespace cdk;

namespace {

ToyUNetConfig tiny_config(bool self_attn, bool cross_attn, CondMode mode, bool sr) {
    ToyUNetConfig cfg;
    cfg.stages = {
        {6, 1, 1, false, false},
        {8, 1, 2, self_attn, cross_attn},
    };
    cfg.cond_mode = mode;
    cfg.in_channels = sr ? 6 : 3;
    cfg.out_channels = 3;
    cfg.emb_dim = 8;
    cfg.attn_heads = 2;
    cfg.sr_conditioned = sr;
    return cfg;
}

NoiseLevel mid_level() { return level_at(Schedule::cosine(), 0.5); }

}  // namespace

TEST_CASE("prompt encoder is frozen and total") {
    const PromptEncoder enc;
    const PromptSeq p = parse_prompt("red left");
    const PromptEmbedding a = enc.encode(p);
    const PromptEmbedding b = enc.encode(p);
    CHECK(max_abs_diff(a.seq, b.seq) == 0.0);
    CHECK(max_abs_diff(a.pooled, b.pooled) == 0.0);
    CHECK(a.n_tokens == 2);
    CHECK_FALSE(a.null_flag);

    // empty prompt -> null embedding, all zeros
    const PromptEmbedding null = enc.encode(PromptSeq{});
    CHECK(null.null_flag);
    CHECK(max_abs(null.seq) == 0.0f);
    CHECK(max_abs(null.pooled) == 0.0f);

    // one-token difference shows up in the sequence
    const PromptEmbedding c = enc.encode(parse_prompt("blue left"));
    CHECK(max_abs_diff(a.seq, c.seq) > 1e-3);

    // per-position vectors are unit length
    for (int i = 0; i < a.n_tokens; ++i) {
        double norm = 0.0;
        for (int d = 0; d < PromptEncoder::kEmbedDim; ++d) {
            const float v = a.seq[static_cast<std::size_t>(i) * PromptEncoder::kEmbedDim + d];
            norm += static_cast<double>(v) * v;
        }
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-5));
    }

    // attention pooling differs from mean pooling but stays deterministic
    const PromptEmbedding attn = enc.encode(p, PoolMode::Attention);
    CHECK(max_abs_diff(attn.pooled, a.pooled) > 1e-4);
    CHECK(max_abs_diff(attn.pooled, enc.encode(p, PoolMode::Attention).pooled) == 0.0);

    CHECK_THROWS_AS(enc.encode(parse_prompt("purple")), std::invalid_argument);
}

TEST_CASE("gmm oracle: single standard component reduces to alpha*z under VP") {
    const GmmSpec gmm = GmmSpec::single({0.0, 0.0}, 1.0);
    const NoiseLevel lv = mid_level();
    TensorF z({2}, {0.7f, -1.1f});
    const auto post = gmm_posterior_mean(z, lv, gmm);
    // E[x|z] = alpha z / (alpha^2 + sigma^2) = alpha z
    CHECK(post[0] == doctest::Approx(lv.alpha * z[0]).epsilon(1e-9));
    CHECK(post[1] == doctest::Approx(lv.alpha * z[1]).epsilon(1e-9));
}

TEST_CASE("gmm oracle vs self-normalized importance sampling") {
    GmmSpec gmm;
    gmm.weights = {1.0};
    gmm.means = {{0.5, -0.3}};
    gmm.covs = {{0.6, 0.2, 0.2, 0.4}};
    gmm.validate();

    const NoiseLevel lv = mid_level();
    TensorF z({2}, {0.9f, 0.1f});
    const auto post = gmm_posterior_mean(z, lv, gmm);

    RngStream rng(97, 0);
    const int draws = 1000000;
    double wsum = 0.0, ex = 0.0, ey = 0.0;
    const double inv2s2 = 1.0 / (2.0 * lv.sigma * lv.sigma);
    for (int i = 0; i < draws; ++i) {
        const auto x = sample_gmm(gmm, rng);
        const double dx = z[0] - lv.alpha * x[0];
        const double dy = z[1] - lv.alpha * x[1];
        const double w = std::exp(-(dx * dx + dy * dy) * inv2s2);
        wsum += w;
        ex += w * x[0];
        ey += w * x[1];
    }
    CHECK(std::fabs(ex / wsum - post[0]) / (std::fabs(post[0]) + 1e-9) <= 0.01);
    CHECK(std::fabs(ey / wsum - post[1]) / (std::fabs(post[1]) + 1e-9) <= 0.01);
}

TEST_CASE("gmm oracle: small sigma pins the posterior to the mean") {
    GmmSpec gmm;
    gmm.weights = {0.5, 0.5};
    gmm.means = {{1.0, 0.0}, {-1.0, 0.0}};
    gmm.covs = {{0.05, 0, 0, 0.05}, {0.05, 0, 0, 0.05}};
    gmm.validate();

    const NoiseLevel lv = level_at(Schedule::cosine(), 0.02);  // tiny sigma
    TensorF z({2}, {static_cast<float>(lv.alpha * 1.0), 0.0f});
    const auto post = gmm_posterior_mean(z, lv, gmm);
    CHECK(post[0] == doctest::Approx(1.0).epsilon(0.02));
    CHECK(std::fabs(post[1]) < 0.02);
}

TEST_CASE("gmm conditional denoiser routes null vs conditioned") {
    GmmSpec gmm;
    gmm.weights = {0.5, 0.5};
    gmm.means = {{1.0, 0.0}, {-1.0, 0.0}};
    gmm.covs = {{0.3, 0, 0, 0.3}, {0.3, 0, 0, 0.3}};
    const GmmDenoiser den(gmm, 0);
    const NoiseLevel lv = mid_level();
    TensorF z({2}, {0.2f, 0.4f});

    PromptEmbedding cond = PromptEmbedding::null_embedding();
    cond.null_flag = false;
    const TensorF eps_cond = den.eps_hat(z, lv, cond);
    const TensorF eps_null = den.eps_hat(z, lv, PromptEmbedding::null_embedding());
    CHECK(max_abs_diff(eps_cond, eps_null) > 1e-3);

    const GmmSpec comp0 = GmmSpec::single({1.0, 0.0}, 0.3);
    CHECK(max_abs_diff(eps_cond, gmm_oracle_eps(z, lv, comp0)) <= 1e-6);
}

TEST_CASE("unet output shape matches input for all conditioning modes") {
    const PromptEncoder enc;
    RngStream rng(7, 7);
    for (const CondMode mode :
         {CondMode::MeanPool, CondMode::AttentionPool, CondMode::CrossAttention}) {
        const ToyUNet net(tiny_config(true, true, mode, false));
        RngStream prng(11, 0);
        const ParamSet params = net.init_params(prng);
        const TensorF z = rng.normal_tensor({3, 8, 8});
        const PromptEmbedding cond = enc.encode(parse_prompt("red left"), pool_mode_for(mode));
        const TensorF out = net.forward(params, z, mid_level(), cond);
        CHECK(out.shape() == z.shape());
        CHECK(out.all_finite());
    }
}

TEST_CASE("unet zero parameters give zero output") {
    const ToyUNet net(tiny_config(true, true, CondMode::CrossAttention, false));
    RngStream prng(13, 0);
    ParamSet params = net.init_params(prng);
    for (auto& [name, t] : params.items)
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.0f;
    RngStream rng(13, 1);
    const TensorF z = rng.normal_tensor({3, 8, 8});
    const PromptEncoder enc;
    const TensorF out = net.forward(params, z, mid_level(), enc.encode(parse_prompt("blue top")));
    CHECK(max_abs(out) == 0.0f);
}

TEST_CASE("skip connections are scaled by 1/sqrt(2)") {
    const ToyUNet net(tiny_config(false, false, CondMode::MeanPool, false));
    RngStream prng(17, 0);
    ParamSet params = net.init_params(prng);
    // Zero the decoder: the skip-add node then carries only the scaled
    // encoder feature.
    for (auto& [name, t] : params.items)
        if (name.rfind("dec", 0) == 0)
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.0f;

    RngStream rng(17, 1);
    const TensorF z = rng.normal_tensor({3, 8, 8});
    const PromptEncoder enc;
    Tape tape;
    const auto vars = net.bind(tape, params, false);
    BuildProbes probes;
    net.build(tape, vars, z, mid_level(), enc.encode(parse_prompt("red left")), 0.0, &probes);

    const TensorF& enc0 = tape.value(probes.find("enc0.out"));
    const TensorF& skip = tape.value(probes.find("dec0.skip_add"));
    CHECK(max_abs_diff(skip, scale(enc0, net.config().skip_scale)) <= 1e-6);
}

TEST_CASE("parameter mass sits at the lowest resolution") {
    const ToyUNet net(ToyUNetConfig::base_default());
    RngStream prng(19, 0);
    const ParamSet params = net.init_params(prng);
    CHECK(net.stage_param_count(params, 1) > net.stage_param_count(params, 0));
}

TEST_CASE("config invariants are enforced") {
    ToyUNetConfig bad = ToyUNetConfig::base_default();
    bad.stages[1].channels = 8;  // decreasing toward low resolution
    CHECK_THROWS_AS(ToyUNet{bad}, std::invalid_argument);

    ToyUNetConfig shift = ToyUNetConfig::base_default();
    shift.stages[0].num_res_blocks = 3;  // more blocks at high res than low
    CHECK_THROWS_AS(ToyUNet{shift}, std::invalid_argument);
}

TEST_CASE("gradients match finite differences for every block type") {
    const PromptEncoder enc;
    RngStream rng(23, 0);

    // Two stages with self+cross attention and the SR pathway cover every
    // block: stem/DBlock convs, CombineEmbs, ResNetBlocks, both attentions,
    // the UBlock skip/upsample path, and the embedding MLPs.
    const ToyUNet net(tiny_config(true, true, CondMode::CrossAttention, true));
    RngStream prng(23, 1);
    ParamSet params = net.init_params(prng);
    // Zero-initialized output head would hide upstream gradients; randomize.
    for (auto& [name, t] : params.items)
        if (name.rfind("out.", 0) == 0)
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal_f() * 0.2f;

    const TensorF z = rng.normal_tensor({6, 8, 8});
    const TensorF target = rng.normal_tensor({3, 8, 8});
    const PromptEmbedding cond = enc.encode(parse_prompt("green bottom small"));
    const NoiseLevel lv = mid_level();

    const std::vector<std::pair<std::string, std::string>> groups = {
        {"res", "resnet blocks"},     {".down.", "dblock convs"},
        {".up.", "ublock convs"},     {"sattn", "self attention"},
        {"xattn", "cross attention"}, {"emb.", "combine embs"},
    };
    for (const auto& [match, label] : groups) {
        const auto report = gradcheck::check(net, params, z, lv, cond, 0.35, target, match, 20,
                                             label);
        INFO(label, " max_rel_err=", report.max_rel_err, " probed=", report.probed);
        CHECK(report.probed >= 20);
        CHECK(report.max_rel_err <= 1e-3);
    }
}

TEST_CASE("gradient of a constant output is zero") {
    // With the (zero-initialized) output head untouched, the net output is
    // identically zero regardless of earlier parameters, so every gradient
    // that flows through the head is zero too.
    const ToyUNet net(tiny_config(false, false, CondMode::MeanPool, false));
    RngStream prng(29, 0);
    const ParamSet params = net.init_params(prng);
    RngStream rng(29, 1);
    const TensorF z = rng.normal_tensor({3, 8, 8});
    const PromptEncoder enc;

    Tape tape;
    const auto vars = net.bind(tape, params, true);
    const int out = net.build(tape, vars, z, mid_level(), enc.encode(parse_prompt("red left")));
    const int loss = tape.mse(out, TensorF::zeros({3, 8, 8}));
    tape.backward(loss);
    CHECK(max_abs(tape.grad(vars.at("enc0.res0.conv1.w"))) == 0.0f);
}

TEST_CASE("tape: quadratic toy function has gradient 2*theta") {
    Tape tape;
    TensorF theta({4}, {0.5f, -1.0f, 2.0f, 0.25f});
    const int leaf = tape.leaf(theta, true);
    const int loss = tape.mse(leaf, TensorF::zeros({4}));  // mean(theta^2)
    tape.backward(loss);
    const TensorF& g = tape.grad(leaf);
    for (std::size_t i = 0; i < g.size(); ++i)
        CHECK(g[i] == doctest::Approx(2.0f * theta[i] / 4.0f).epsilon(1e-6));
}
