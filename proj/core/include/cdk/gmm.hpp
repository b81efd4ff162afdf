#pragma once

#include <vector>

#include "cdk/denoiser.hpp"
#include "cdk/rng.hpp"
#include "cdk/schedule.hpp"
#include "cdk/tensor.hpp"

namespace cdk {

/// Gaussian mixture over R^d: weights sum to 1, covariances SPD (row-major).
/// An analytically tractable data distribution for oracle tests.
struct GmmSpec {
    std::vector<double> weights;             // K
    std::vector<std::vector<double>> means;  // K x d
    std::vector<std::vector<double>> covs;   // K x (d*d)

    int components() const { return static_cast<int>(weights.size()); }
    int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }
    void validate() const;

    static GmmSpec single(std::vector<double> mean, double iso_var);
};

/// Exact posterior mean E[x | z_t] under the variance-preserving marginal
/// q(z_t | x) = N(alpha x, sigma^2 I) with x ~ GMM.
std::vector<double> gmm_posterior_mean(const TensorF& z_t, const NoiseLevel& level,
                                       const GmmSpec& gmm);

/// Exact eps-prediction (z_t - alpha E[x|z_t]) / sigma, i.e. the scaled score
/// of the noised mixture.
TensorF gmm_oracle_eps(const TensorF& z_t, const NoiseLevel& level, const GmmSpec& gmm);

/// One draw x ~ GMM.
std::vector<double> sample_gmm(const GmmSpec& gmm, RngStream& rng);

/// Denoiser backed by GMM oracles: null conditioning scores against the full
/// mixture; non-null conditioning scores against one designated component
/// (the conditional distribution of a labeled mixture).
class GmmDenoiser : public Denoiser {
public:
    GmmDenoiser(GmmSpec mixture, int cond_component = -1);

    TensorF eps_hat(const TensorF& z_t, const NoiseLevel& level,
                    const PromptEmbedding& cond) const override;

private:
    GmmSpec mixture_;
    GmmSpec component_;  // valid when cond_component_ >= 0
    int cond_component_;
};

}  // namespace cdk
