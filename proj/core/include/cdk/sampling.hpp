#pragma once

#include <cstdint>
#include <vector>

#include "cdk/denoiser.hpp"
#include "cdk/diffusion.hpp"
#include "cdk/rng.hpp"

namespace cdk {

enum class ThresholdMode { None, Static, Dynamic };

/// Guidance weight plus x-prediction thresholding mode. w = 1 disables
/// guidance; Dynamic uses percentile p in (0, 100].
struct GuidanceConfig {
    double w = 1.0;
    ThresholdMode threshold = ThresholdMode::None;
    double p = 99.5;

    void validate() const;
};

enum class SamplerKind { Ancestral, Ddim };

/// Sampler selection. steps is the number of update steps; the t-grid has
/// steps+1 uniformly spaced points from 1 down to 0. gamma in [0,1] sets the
/// ancestral sampler's injected-noise variance (geometric interpolation
/// between the posterior variance and the transition variance).
struct SamplerConfig {
    SamplerKind kind = SamplerKind::Ddim;
    int steps = 64;
    double gamma = 0.0;

    void validate() const;
};

/// Noise-conditioning augmentation strength in [0, 1].
struct AugLevel {
    double value = 0.0;

    AugLevel() = default;
    explicit AugLevel(double v);
};

/// w * eps_cond + (1 - w) * eps_uncond.
TensorF cfg_combine(const TensorF& eps_cond, const TensorF& eps_uncond, double w);

/// Elementwise clamp of the x-prediction to [-1, 1].
TensorF static_threshold(const TensorF& x_hat);

/// Percentile-scaled clamp: s = max(percentile_p(|x|), 1), output
/// clip(x, -s, s) / s. Percentile is linear-interpolation over the flattened
/// absolute values of the sample.
TensorF dynamic_threshold(const TensorF& x_hat, double p);

/// Applies the configured threshold (None passes through).
TensorF apply_threshold(const TensorF& x_hat, const GuidanceConfig& guidance);

/// Deterministic update z_s = alpha_s x_hat + (sigma_s/sigma_t)(z_t - alpha_t x_hat).
TensorF ddim_step(const TensorF& z_t, const TensorF& x_hat, double s, double t,
                  const Schedule& schedule);

/// Stochastic update: posterior mean plus noise with std
/// sqrt(posterior_var^(1-gamma) * transition_var^gamma).
TensorF ancestral_step(const TensorF& z_t, const TensorF& x_hat, double s, double t, double gamma,
                       const Schedule& schedule, const TensorF& eps);

/// Full guided sampling loop: z ~ N(0, I), then over the decreasing t-grid
/// evaluates the denoiser twice (conditional and null), combines with the
/// guidance weight, converts to an x-prediction, thresholds, and steps.
/// Returns the thresholded x-prediction of the final step.
TensorF sample(const Denoiser& denoiser, const PromptEmbedding& cond, const Schedule& schedule,
               const SamplerConfig& sampler, const GuidanceConfig& guidance,
               const std::vector<int>& shape, RngStream& rng);

/// n independent chains; chain i draws from RngStream(seed, stream_base + i),
/// so results are reproducible and independent of thread scheduling.
std::vector<TensorF> sample_batch(const Denoiser& denoiser, const PromptEmbedding& cond,
                                  const Schedule& schedule, const SamplerConfig& sampler,
                                  const GuidanceConfig& guidance, const std::vector<int>& shape,
                                  int n, std::uint64_t seed, std::uint64_t stream_base);

/// Variance-preserving corruption of a low-resolution conditioner at noise
/// time aug: forward_marginal(x_lr, level_at(schedule, aug), eps).
TensorF apply_cond_aug(const TensorF& x_lr, AugLevel aug, const Schedule& schedule,
                       RngStream& rng);

}  // namespace cdk
