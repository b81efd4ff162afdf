#include "cdk/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include "cdk/errors.hpp"

namespace cdk {

TensorF forward_marginal(const TensorF& x, const NoiseLevel& level, const TensorF& eps) {
    require_same_shape(x, eps, "forward_marginal");
    const float a = static_cast<float>(level.alpha);
    const float s = static_cast<float>(level.sigma);
    TensorF out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + s * eps[i];
    return out;
}

TensorF forward_transition(const TensorF& z_s, double s, double t, const Schedule& schedule,
                           const TensorF& eps) {
    require_same_shape(z_s, eps, "forward_transition");
    if (!(s < t)) throw std::invalid_argument("forward_transition: requires s < t");
    const NoiseLevel ls = level_at(schedule, s);
    const NoiseLevel lt = level_at(schedule, t);
    const float ratio = static_cast<float>(lt.alpha / ls.alpha);
    const float sd = static_cast<float>(std::sqrt(transition_var(schedule, s, t)));
    TensorF out(z_s.shape());
    for (std::size_t i = 0; i < z_s.size(); ++i) out[i] = ratio * z_s[i] + sd * eps[i];
    return out;
}

PosteriorParams posterior_params(const TensorF& z_t, const TensorF& x, double s, double t,
                                 const Schedule& schedule) {
    require_same_shape(z_t, x, "posterior_params");
    if (!(s < t)) throw std::invalid_argument("posterior_params: requires s < t");
    const NoiseLevel ls = level_at(schedule, s);
    const NoiseLevel lt = level_at(schedule, t);
    const double r = std::exp(lt.lambda - ls.lambda);  // < 1 on a decreasing schedule
    const float cz = static_cast<float>(r * ls.alpha / lt.alpha);
    const float cx = static_cast<float>((1.0 - r) * ls.alpha);
    PosteriorParams out;
    out.mu = TensorF(z_t.shape());
    for (std::size_t i = 0; i < z_t.size(); ++i) out.mu[i] = cz * z_t[i] + cx * x[i];
    out.var = std::max((1.0 - r) * ls.sigma * ls.sigma, 0.0);
    return out;
}

TensorF eps_to_x(const TensorF& z_t, const TensorF& eps_hat, const NoiseLevel& level) {
    require_same_shape(z_t, eps_hat, "eps_to_x");
    if (level.sigma <= 0.0) throw NumericError("eps_to_x: sigma is zero");
    const float s = static_cast<float>(level.sigma);
    const float inv_a = static_cast<float>(1.0 / level.alpha);
    TensorF out(z_t.shape());
    for (std::size_t i = 0; i < z_t.size(); ++i) out[i] = (z_t[i] - s * eps_hat[i]) * inv_a;
    return out;
}

TensorF x_to_eps(const TensorF& z_t, const TensorF& x_hat, const NoiseLevel& level) {
    require_same_shape(z_t, x_hat, "x_to_eps");
    if (level.sigma <= 0.0) throw NumericError("x_to_eps: sigma is zero");
    const float a = static_cast<float>(level.alpha);
    const float inv_s = static_cast<float>(1.0 / level.sigma);
    TensorF out(z_t.shape());
    for (std::size_t i = 0; i < z_t.size(); ++i) out[i] = (z_t[i] - a * x_hat[i]) * inv_s;
    return out;
}

double denoising_loss(const Denoiser& denoiser, const TensorF& x, const PromptEmbedding& cond,
                      const Schedule& schedule, RngStream& rng) {
    const double t = rng.uniform();
    const NoiseLevel level = level_at(schedule, t);
    const TensorF eps = rng.normal_tensor(x.shape());
    const TensorF z_t = forward_marginal(x, level, eps);
    const TensorF eps_hat = denoiser.eps_hat(z_t, level, cond);
    require_same_shape(eps_hat, eps, "denoising_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double d = static_cast<double>(eps_hat[i]) - static_cast<double>(eps[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(eps.size());
}

PromptEmbedding drop_conditioning(const PromptEmbedding& cond, double p_drop, RngStream& rng) {
    if (!(p_drop >= 0.0 && p_drop <= 1.0))
        throw std::invalid_argument("drop_conditioning: p_drop out of [0,1]");
    if (rng.uniform() < p_drop) return PromptEmbedding::null_embedding();
    return cond;
}

}  // namespace cdk
