#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cdk/cascade.hpp"
#include "cdk/resample.hpp"

using namespace cdk;

namespace {

ToyUNetConfig small_config(bool sr) {
    ToyUNetConfig cfg;
    cfg.stages = {
        {8, 1, 1, false, false},
        {16, 1, 2, false, true},
    };
    cfg.in_channels = sr ? 6 : 3;
    cfg.emb_dim = 16;
    cfg.sr_conditioned = sr;
    return cfg;
}

struct Chain {
    ToyUNet base{small_config(false)};
    ToyUNet sr{small_config(true)};
    ParamSet base_params;
    ParamSet sr_params;

    Chain() {
        RngStream r1(71, 0), r2(71, 1);
        base_params = base.init_params(r1);
        sr_params = sr.init_params(r2);
    }

    std::vector<CascadeStageSpec> stages(double aug = 0.2) const {
        CascadeStageSpec s1;
        s1.role = StageRole::Base;
        s1.out_res = 8;
        s1.net = &base;
        s1.params = &base_params;
        s1.guidance = {2.0, ThresholdMode::Static, 99.5};
        s1.sampler = {SamplerKind::Ddim, 6, 0.0};
        CascadeStageSpec s2;
        s2.role = StageRole::SuperRes;
        s2.in_res = 8;
        s2.out_res = 16;
        s2.net = &sr;
        s2.params = &sr_params;
        s2.guidance = {2.0, ThresholdMode::Static, 99.5};
        s2.sampler = {SamplerKind::Ddim, 6, 0.0};
        s2.aug = AugLevel(aug);
        return {s1, s2};
    }
};

}  // namespace

TEST_CASE("downsample") {
    const TensorF constant = TensorF::full({3, 8, 8}, 0.4f);
    CHECK(max_abs_diff(downsample(constant, 2), TensorF::full({3, 4, 4}, 0.4f)) <= 1e-7);
    CHECK(max_abs_diff(downsample(constant, 1), constant) == 0.0);

    // checkerboard of +-1 averages to zero
    TensorF checker({1, 4, 4});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) checker.at(0, y, x) = ((x + y) % 2 == 0) ? 1.0f : -1.0f;
    CHECK(max_abs(downsample(checker, 2)) == 0.0f);

    CHECK_THROWS_AS(downsample(TensorF::zeros({3, 9, 9}), 2), std::invalid_argument);
}

TEST_CASE("upsample") {
    const TensorF constant = TensorF::full({3, 4, 4}, -0.3f);
    const TensorF up = upsample_bilinear(constant, 2);
    CHECK(up.dim(1) == 8);
    CHECK(max_abs_diff(up, TensorF::full({3, 8, 8}, -0.3f)) <= 1e-6);

    // down(up(const)) is the identity
    CHECK(max_abs_diff(downsample(up, 2), constant) <= 1e-6);

    // convex combination: magnitudes never grow
    RngStream rng(73, 0);
    const TensorF noisy = rng.normal_tensor({3, 4, 4});
    CHECK(max_abs(upsample_bilinear(noisy, 2)) <= max_abs(noisy) + 1e-6f);
}

TEST_CASE("cascade on untrained models produces finite bounded output") {
    const Chain chain;
    const PromptEncoder enc;
    const Schedule sched = Schedule::cosine();
    const CascadeResult result =
        run_cascade(chain.stages(), parse_prompt("red left"), sched, enc, 5);
    REQUIRE(result.stage_outputs.size() == 2);
    CHECK(result.stage_outputs[0].dim(1) == 8);
    CHECK(result.final_image.dim(1) == 16);
    CHECK(result.final_image.all_finite());
    CHECK(max_abs(result.final_image) <= 1.0f);  // static threshold postcondition
}

TEST_CASE("cascade is deterministic per seed") {
    const Chain chain;
    const PromptEncoder enc;
    const Schedule sched = Schedule::cosine();
    const CascadeResult a = run_cascade(chain.stages(), parse_prompt("blue top"), sched, enc, 9);
    const CascadeResult b = run_cascade(chain.stages(), parse_prompt("blue top"), sched, enc, 9);
    CHECK(max_abs_diff(a.final_image, b.final_image) == 0.0);
    const CascadeResult c = run_cascade(chain.stages(), parse_prompt("blue top"), sched, enc, 10);
    CHECK(max_abs_diff(a.final_image, c.final_image) > 0.0);
}

TEST_CASE("prompt conditioning reaches every stage") {
    const Chain chain;
    const PromptEncoder enc;
    const Schedule sched = Schedule::cosine();
    const CascadeResult a = run_cascade(chain.stages(), parse_prompt("red left"), sched, enc, 3);
    const CascadeResult b = run_cascade(chain.stages(), parse_prompt("blue right"), sched, enc, 3);
    // same seeds, different prompt: every stage output must change
    CHECK(max_abs_diff(a.stage_outputs[0], b.stage_outputs[0]) > 0.0);
    CHECK(max_abs_diff(a.stage_outputs[1], b.stage_outputs[1]) > 0.0);
}

TEST_CASE("aug sweep changes the sr output at a fixed seed") {
    const Chain chain;
    const PromptEncoder enc;
    const Schedule sched = Schedule::cosine();
    const CascadeResult a =
        run_cascade(chain.stages(0.1), parse_prompt("green center"), sched, enc, 12);
    const CascadeResult b =
        run_cascade(chain.stages(0.3), parse_prompt("green center"), sched, enc, 12);
    CHECK(max_abs_diff(a.stage_outputs[0], b.stage_outputs[0]) == 0.0);  // base unaffected
    CHECK(max_abs_diff(a.final_image, b.final_image) > 0.0);
}

TEST_CASE("per-stage prompts are supported") {
    const Chain chain;
    const PromptEncoder enc;
    const Schedule sched = Schedule::cosine();
    auto stages = chain.stages();
    stages[1].prompt_override = parse_prompt("yellow bottom");
    const CascadeResult a = run_cascade(stages, parse_prompt("red left"), sched, enc, 4);
    const CascadeResult b = run_cascade(chain.stages(), parse_prompt("red left"), sched, enc, 4);
    CHECK(max_abs_diff(a.stage_outputs[0], b.stage_outputs[0]) == 0.0);
    CHECK(max_abs_diff(a.final_image, b.final_image) > 0.0);
}

TEST_CASE("stage chain validation") {
    const Chain chain;
    auto stages = chain.stages();
    stages[1].in_res = 16;  // mismatch with base out_res
    CHECK_THROWS_AS(validate_stages(stages), std::invalid_argument);

    auto doubled = chain.stages();
    doubled[1].out_res = 32;  // not 2x in_res
    CHECK_THROWS_AS(validate_stages(doubled), std::invalid_argument);

    auto swapped = chain.stages();
    swapped[0].role = StageRole::SuperRes;
    CHECK_THROWS_AS(validate_stages(swapped), std::invalid_argument);
}
