#include "cdk/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cdk/errors.hpp"
#include "cdk/parallel.hpp"

namespace cdk {

void GuidanceConfig::validate() const {
    if (!std::isfinite(w)) throw std::invalid_argument("guidance: w must be finite");
    if (threshold == ThresholdMode::Dynamic && !(p > 0.0 && p <= 100.0))
        throw std::invalid_argument("guidance: dynamic percentile must be in (0,100]");
}

void SamplerConfig::validate() const {
    if (steps < 1) throw std::invalid_argument("sampler: steps must be >= 1");
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw std::invalid_argument("sampler: gamma must be in [0,1]");
}

AugLevel::AugLevel(double v) : value(v) {
    if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("aug_level: value must be in [0,1]");
}

TensorF cfg_combine(const TensorF& eps_cond, const TensorF& eps_uncond, double w) {
    require_same_shape(eps_cond, eps_uncond, "cfg_combine");
    const float fw = static_cast<float>(w);
    TensorF out(eps_cond.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = fw * eps_cond[i] + (1.0f - fw) * eps_uncond[i];
    return out;
}

TensorF static_threshold(const TensorF& x_hat) { return clamp(x_hat, -1.0f, 1.0f); }

TensorF dynamic_threshold(const TensorF& x_hat, double p) {
    if (!(p > 0.0 && p <= 100.0))
        throw std::invalid_argument("dynamic_threshold: percentile must be in (0,100]");
    std::vector<float> abs_vals(x_hat.size());
    for (std::size_t i = 0; i < x_hat.size(); ++i) abs_vals[i] = std::fabs(x_hat[i]);
    std::sort(abs_vals.begin(), abs_vals.end());
    const double rank = p / 100.0 * static_cast<double>(abs_vals.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(rank);
    const std::size_t hi = std::min(lo + 1, abs_vals.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    const double pct = abs_vals[lo] + frac * (abs_vals[hi] - abs_vals[lo]);
    const float s = static_cast<float>(std::max(pct, 1.0));
    TensorF out(x_hat.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::clamp(x_hat[i], -s, s) / s;
    return out;
}

TensorF apply_threshold(const TensorF& x_hat, const GuidanceConfig& guidance) {
    switch (guidance.threshold) {
        case ThresholdMode::None: return x_hat;
        case ThresholdMode::Static: return static_threshold(x_hat);
        case ThresholdMode::Dynamic: return dynamic_threshold(x_hat, guidance.p);
    }
    throw std::invalid_argument("apply_threshold: unknown mode");
}

TensorF ddim_step(const TensorF& z_t, const TensorF& x_hat, double s, double t,
                  const Schedule& schedule) {
    require_same_shape(z_t, x_hat, "ddim_step");
    if (!(s < t)) throw std::invalid_argument("ddim_step: requires s < t");
    const NoiseLevel ls = level_at(schedule, s);
    const NoiseLevel lt = level_at(schedule, t);
    if (lt.sigma <= 0.0) throw NumericError("ddim_step: sigma_t is zero");
    const float as = static_cast<float>(ls.alpha);
    const float at = static_cast<float>(lt.alpha);
    const float ratio = static_cast<float>(ls.sigma / lt.sigma);
    TensorF out(z_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = as * x_hat[i] + ratio * (z_t[i] - at * x_hat[i]);
    return out;
}

TensorF ancestral_step(const TensorF& z_t, const TensorF& x_hat, double s, double t, double gamma,
                       const Schedule& schedule, const TensorF& eps) {
    require_same_shape(z_t, x_hat, "ancestral_step");
    require_same_shape(z_t, eps, "ancestral_step");
    if (!(s < t)) throw std::invalid_argument("ancestral_step: requires s < t");
    PosteriorParams post = posterior_params(z_t, x_hat, s, t, schedule);
    const double tvar = transition_var(schedule, s, t);
    const float sd =
        static_cast<float>(std::sqrt(std::pow(post.var, 1.0 - gamma) * std::pow(tvar, gamma)));
    for (std::size_t i = 0; i < post.mu.size(); ++i) post.mu[i] += sd * eps[i];
    return std::move(post.mu);
}

TensorF sample(const Denoiser& denoiser, const PromptEmbedding& cond, const Schedule& schedule,
               const SamplerConfig& sampler, const GuidanceConfig& guidance,
               const std::vector<int>& shape, RngStream& rng) {
    sampler.validate();
    guidance.validate();
    const PromptEmbedding null_cond = PromptEmbedding::null_embedding();
    TensorF z = rng.normal_tensor(shape);
    TensorF x_hat;
    const int T = sampler.steps;
    for (int i = 0; i < T; ++i) {
        const double t = 1.0 - static_cast<double>(i) / T;
        const double s = 1.0 - static_cast<double>(i + 1) / T;
        const NoiseLevel lt = level_at(schedule, t);
        const TensorF eps_c = denoiser.eps_hat(z, lt, cond);
        const TensorF eps_u = denoiser.eps_hat(z, lt, null_cond);
        const TensorF eps_g = cfg_combine(eps_c, eps_u, guidance.w);
        x_hat = apply_threshold(eps_to_x(z, eps_g, lt), guidance);
        if (!x_hat.all_finite())
            throw NumericError("sample: non-finite x-prediction at step " + std::to_string(i));
        if (i + 1 == T) break;  // the final x-prediction is the output
        if (sampler.kind == SamplerKind::Ddim) {
            z = ddim_step(z, x_hat, s, t, schedule);
        } else {
            const TensorF eps = rng.normal_tensor(shape);
            z = ancestral_step(z, x_hat, s, t, sampler.gamma, schedule, eps);
        }
        if (!z.all_finite())
            throw NumericError("sample: non-finite latent at step " + std::to_string(i));
    }
    return x_hat;
}

std::vector<TensorF> sample_batch(const Denoiser& denoiser, const PromptEmbedding& cond,
                                  const Schedule& schedule, const SamplerConfig& sampler,
                                  const GuidanceConfig& guidance, const std::vector<int>& shape,
                                  int n, std::uint64_t seed, std::uint64_t stream_base) {
    std::vector<TensorF> out(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        RngStream rng(seed, stream_base + i);
        out[i] = sample(denoiser, cond, schedule, sampler, guidance, shape, rng);
    });
    return out;
}

TensorF apply_cond_aug(const TensorF& x_lr, AugLevel aug, const Schedule& schedule,
                       RngStream& rng) {
    const NoiseLevel level = level_at(schedule, aug.value);
    const TensorF eps = rng.normal_tensor(x_lr.shape());
    return forward_marginal(x_lr, level, eps);
}

}  // namespace cdk
