#pragma once

#include <cstdint>
#include <vector>

#include "cdk/prompt.hpp"
#include "cdk/sampling.hpp"
#include "cdk/schedule.hpp"
#include "cdk/unet.hpp"

namespace cdk {

enum class StageRole { Base, SuperRes };

/// One stage of the base -> super-resolution chain. SuperRes stages double
/// the resolution and corrupt the previous stage's output at aug before
/// conditioning on it.
struct CascadeStageSpec {
    StageRole role = StageRole::Base;
    int in_res = 0;   // SuperRes only
    int out_res = 8;
    const ToyUNet* net = nullptr;
    const ParamSet* params = nullptr;
    GuidanceConfig guidance;
    SamplerConfig sampler;
    AugLevel aug;     // SuperRes only
    // Optional per-stage prompt (style edits); empty means the chain prompt.
    PromptSeq prompt_override;
};

struct CascadeResult {
    TensorF final_image;
    std::vector<TensorF> stage_outputs;
};

void validate_stages(const std::vector<CascadeStageSpec>& stages);

/// Runs the stage chain on one prompt. Per-stage rng streams are derived
/// from the seed (stream 1000+i for the sampler, 2000+i for the aug noise),
/// so a (stages, prompt, seed) triple is fully reproducible.
CascadeResult run_cascade(const std::vector<CascadeStageSpec>& stages, const PromptSeq& prompt,
                          const Schedule& schedule, const PromptEncoder& encoder,
                          std::uint64_t seed);

}  // namespace cdk
