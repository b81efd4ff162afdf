#pragma once

#include "cdk/prompt.hpp"
#include "cdk/schedule.hpp"
#include "cdk/tensor.hpp"

namespace cdk {

/// Anything that predicts the noise content of a latent. Implementations must
/// accept null conditioning (the unconditional branch of guided sampling).
struct Denoiser {
    virtual ~Denoiser() = default;
    virtual TensorF eps_hat(const TensorF& z_t, const NoiseLevel& level,
                            const PromptEmbedding& cond) const = 0;
};

}  // namespace cdk
