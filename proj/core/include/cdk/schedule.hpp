#pragma once

#include <memory>
#include <vector>

namespace cdk {

/// One point on a variance-preserving noise schedule:
/// alpha^2 + sigma^2 = 1 and lambda = log(alpha^2 / sigma^2).
struct NoiseLevel {
    double t = 0.0;
    double alpha = 1.0;
    double sigma = 0.0;
    double lambda = 0.0;
};

enum class ScheduleKind { Cosine, Linear };

/// Continuous-time noise schedule. The cosine schedule is
///   alpha_t^2 = cos^2(pi/2 * (t+s)/(1+s)) / cos^2(pi/2 * s/(1+s)),  s = 0.008.
/// The linear schedule is defined on a discrete grid of n_steps betas spaced
/// linearly in [beta_start, beta_end]; between grid points log(alpha_bar) is
/// interpolated linearly, and alpha_t = sqrt(alpha_bar).
///
/// alpha^2 is clamped into [kAlphaSqMin, 1 - kAlphaSqMin] at both endpoints
/// so lambda stays finite and strictly decreasing on 1000-point grids.
class Schedule {
public:
    static constexpr double kCosineOffset = 0.008;
    static constexpr double kAlphaSqMin = 1e-6;

    static Schedule cosine();
    static Schedule linear(double beta_start = 1e-4, double beta_end = 0.02,
                           int n_steps = 1000);

    ScheduleKind kind() const { return kind_; }
    double beta_start() const { return beta_start_; }
    double beta_end() const { return beta_end_; }
    int n_steps() const { return n_steps_; }

private:
    Schedule() = default;

    ScheduleKind kind_ = ScheduleKind::Cosine;
    double beta_start_ = 1e-4;
    double beta_end_ = 0.02;
    int n_steps_ = 1000;
    // log(alpha_bar) at knots i/n_steps, i = 0..n_steps; linear only.
    std::shared_ptr<const std::vector<double>> log_alpha_bar_;

    friend NoiseLevel level_at(const Schedule&, double);
};

/// Noise level at time t in [0, 1]. Pure and deterministic.
NoiseLevel level_at(const Schedule& schedule, double t);

/// Forward transition variance sigma^2_{t|s} = (1 - e^{lambda_t - lambda_s}) * sigma_t^2
/// for 0 <= s < t <= 1. Always >= 0.
double transition_var(const Schedule& schedule, double s, double t);

}  // namespace cdk
