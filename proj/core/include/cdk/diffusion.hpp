#pragma once

#include "cdk/denoiser.hpp"
#include "cdk/prompt.hpp"
#include "cdk/rng.hpp"
#include "cdk/schedule.hpp"
#include "cdk/tensor.hpp"

namespace cdk {

/// Latent plus its time; z must stay finite and t in [0,1].
struct DiffusionState {
    TensorF z;
    double t = 1.0;
};

/// q(z_t | x): returns alpha_t * x + sigma_t * eps.
TensorF forward_marginal(const TensorF& x, const NoiseLevel& level, const TensorF& eps);

/// q(z_t | z_s) for s < t: (alpha_t/alpha_s) * z_s + sqrt(var_{t|s}) * eps.
TensorF forward_transition(const TensorF& z_s, double s, double t, const Schedule& schedule,
                           const TensorF& eps);

struct PosteriorParams {
    TensorF mu;
    double var = 0.0;
};

/// Forward-process posterior q(z_s | z_t, x) mean and variance for s < t.
PosteriorParams posterior_params(const TensorF& z_t, const TensorF& x, double s, double t,
                                 const Schedule& schedule);

/// x-prediction from an eps-prediction: (z_t - sigma_t * eps_hat) / alpha_t.
TensorF eps_to_x(const TensorF& z_t, const TensorF& eps_hat, const NoiseLevel& level);
/// Inverse of eps_to_x.
TensorF x_to_eps(const TensorF& z_t, const TensorF& x_hat, const NoiseLevel& level);

/// One stochastic draw of the eps-space denoising objective:
/// t ~ U(0,1), eps ~ N(0,I), z_t = alpha x + sigma eps, returns
/// mean squared error between the denoiser's prediction and eps.
double denoising_loss(const Denoiser& denoiser, const TensorF& x, const PromptEmbedding& cond,
                      const Schedule& schedule, RngStream& rng);

/// With probability p_drop replaces cond by the all-zero null embedding.
PromptEmbedding drop_conditioning(const PromptEmbedding& cond, double p_drop, RngStream& rng);

}  // namespace cdk
