#include "cdk/cascade.hpp"

#include <stdexcept>
#include <string>

#include "cdk/resample.hpp"
#include "cdk/train.hpp"

namespace cdk {

void validate_stages(const std::vector<CascadeStageSpec>& stages) {
    if (stages.empty()) throw std::invalid_argument("cascade: no stages");
    if (stages.front().role != StageRole::Base)
        throw std::invalid_argument("cascade: first stage must be Base");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const CascadeStageSpec& st = stages[i];
        if (!st.net || !st.params) throw std::invalid_argument("cascade: stage missing model");
        if (st.out_res < 2) throw std::invalid_argument("cascade: bad out_res");
        if (i == 0) continue;
        if (st.role != StageRole::SuperRes)
            throw std::invalid_argument("cascade: only the first stage may be Base");
        if (st.in_res != stages[i - 1].out_res)
            throw std::invalid_argument("cascade: stage " + std::to_string(i + 1) +
                                        " in_res does not match previous out_res");
        if (st.out_res != 2 * st.in_res)
            throw std::invalid_argument("cascade: super-resolution stages must double the resolution");
        if (!st.net->config().sr_conditioned)
            throw std::invalid_argument("cascade: super-resolution stage needs an SR-conditioned net");
    }
}

CascadeResult run_cascade(const std::vector<CascadeStageSpec>& stages, const PromptSeq& prompt,
                          const Schedule& schedule, const PromptEncoder& encoder,
                          std::uint64_t seed) {
    validate_stages(stages);
    CascadeResult result;
    result.stage_outputs.reserve(stages.size());

    TensorF current;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const CascadeStageSpec& st = stages[i];
        const PromptSeq& stage_prompt = st.prompt_override.empty() ? prompt : st.prompt_override;
        const PromptEmbedding cond =
            encoder.encode(stage_prompt, pool_mode_for(st.net->config().cond_mode));

        RngStream chain_rng(seed, 1000 + i);
        if (st.role == StageRole::Base) {
            UNetDenoiser denoiser(*st.net, *st.params);
            current = sample(denoiser, cond, schedule, st.sampler, st.guidance,
                             {3, st.out_res, st.out_res}, chain_rng);
        } else {
            RngStream aug_rng(seed, 2000 + i);
            const TensorF corrupted = apply_cond_aug(current, st.aug, schedule, aug_rng);
            UNetDenoiser denoiser(*st.net, *st.params, upsample_bilinear(corrupted, 2),
                                  st.aug.value);
            current = sample(denoiser, cond, schedule, st.sampler, st.guidance,
                             {3, st.out_res, st.out_res}, chain_rng);
        }
        result.stage_outputs.push_back(current);
    }
    result.final_image = current;
    return result;
}

}  // namespace cdk
