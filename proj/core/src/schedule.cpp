#include "cdk/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cdk {

namespace {
constexpr double kHalfPi = 1.5707963267948966;

NoiseLevel from_alpha_sq(double t, double a2) {
    a2 = std::clamp(a2, Schedule::kAlphaSqMin, 1.0 - Schedule::kAlphaSqMin);
    NoiseLevel lv;
    lv.t = t;
    lv.alpha = std::sqrt(a2);
    lv.sigma = std::sqrt(1.0 - a2);
    lv.lambda = std::log(a2) - std::log1p(-a2);
    return lv;
}
}  // namespace

Schedule Schedule::cosine() {
    Schedule s;
    s.kind_ = ScheduleKind::Cosine;
    return s;
}

Schedule Schedule::linear(double beta_start, double beta_end, int n_steps) {
    if (!(beta_start < beta_end))
        throw std::invalid_argument("schedule: beta_start must be < beta_end");
    if (n_steps < 2) throw std::invalid_argument("schedule: n_steps must be >= 2");
    Schedule s;
    s.kind_ = ScheduleKind::Linear;
    s.beta_start_ = beta_start;
    s.beta_end_ = beta_end;
    s.n_steps_ = n_steps;
    auto knots = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n_steps) + 1, 0.0);
    double acc = 0.0;
    for (int i = 1; i <= n_steps; ++i) {
        const double beta =
            beta_start + (beta_end - beta_start) * static_cast<double>(i - 1) / (n_steps - 1);
        acc += std::log1p(-beta);
        (*knots)[static_cast<std::size_t>(i)] = acc;
    }
    s.log_alpha_bar_ = std::move(knots);
    return s;
}

NoiseLevel level_at(const Schedule& schedule, double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("schedule: t out of range [0,1]: " + std::to_string(t));
    if (schedule.kind() == ScheduleKind::Cosine) {
        const double s = Schedule::kCosineOffset;
        const double num = std::cos(kHalfPi * (t + s) / (1.0 + s));
        const double den = std::cos(kHalfPi * s / (1.0 + s));
        return from_alpha_sq(t, (num * num) / (den * den));
    }
    const auto& knots = *schedule.log_alpha_bar_;
    const int n = schedule.n_steps();
    const double u = t * n;
    const int i = std::min(static_cast<int>(u), n - 1);
    const double frac = u - i;
    const std::size_t idx = static_cast<std::size_t>(i);
    const double log_ab = knots[idx] + frac * (knots[idx + 1] - knots[idx]);
    return from_alpha_sq(t, std::exp(log_ab));
}

double transition_var(const Schedule& schedule, double s, double t) {
    if (!(s < t)) throw std::invalid_argument("schedule: transition requires s < t");
    const NoiseLevel ls = level_at(schedule, s);
    const NoiseLevel lt = level_at(schedule, t);
    const double v = (1.0 - std::exp(lt.lambda - ls.lambda)) * lt.sigma * lt.sigma;
    return std::max(v, 0.0);
}

}  // namespace cdk
