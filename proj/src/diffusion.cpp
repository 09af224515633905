#include "silo/diffusion.hpp"

#include <cmath>

#include "silo/error.hpp"

namespace silo {

NoiseSchedule NoiseSchedule::make(std::size_t steps, double beta_start, double beta_end) {
    if (steps < 1) throw ConfigError("NoiseSchedule: steps must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw ConfigError("NoiseSchedule: need 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.T_ = steps;
    s.beta_start_ = beta_start;
    s.beta_end_ = beta_end;
    s.beta_.resize(steps);
    s.alpha_bar_.resize(steps + 1);
    s.alpha_bar_[0] = 1.0;
    for (std::size_t t = 1; t <= steps; ++t) {
        const double frac =
            steps == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(steps - 1);
        s.beta_[t - 1] = beta_start + (beta_end - beta_start) * frac;
        s.alpha_bar_[t] = s.alpha_bar_[t - 1] * (1.0 - s.beta_[t - 1]);
    }
    return s;
}

double NoiseSchedule::beta(std::size_t t) const {
    if (t < 1 || t > T_) throw ConfigError("NoiseSchedule: t=" + std::to_string(t) +
                                           " outside 1.." + std::to_string(T_));
    return beta_[t - 1];
}

double NoiseSchedule::alpha(std::size_t t) const { return 1.0 - beta(t); }

double NoiseSchedule::alpha_bar(std::size_t t) const {
    if (t > T_) throw ConfigError("NoiseSchedule: t=" + std::to_string(t) + " outside 0.." +
                                  std::to_string(T_));
    return alpha_bar_[t];
}

Tensor forward_noise(const Tensor& z0, std::size_t t, const NoiseSchedule& sched, Rng& rng) {
    if (t == 0) return z0;  // alpha_bar(0) = 1: no noise, no draw
    if (t > sched.steps()) {
        throw ConfigError("forward_noise: t=" + std::to_string(t) + " outside 0.." +
                          std::to_string(sched.steps()));
    }
    const double abar = sched.alpha_bar(t);
    const double s_signal = std::sqrt(abar);
    const double s_noise = std::sqrt(1.0 - abar);
    Tensor out = z0;
    for (auto& v : out.data()) v = s_signal * v + s_noise * rng.normal();
    return out;
}

AncestralCoeffs ancestral_coeffs(std::size_t t, const NoiseSchedule& sched) {
    if (t < 1 || t > sched.steps()) {
        throw ConfigError("ancestral_step: t=" + std::to_string(t) + " outside 1.." +
                          std::to_string(sched.steps()));
    }
    const double beta = sched.beta(t);
    const double alpha = sched.alpha(t);
    const double abar = sched.alpha_bar(t);
    const double abar_prev = sched.alpha_bar(t - 1);
    AncestralCoeffs c;
    c.z_t = std::sqrt(alpha) * (1.0 - abar_prev) / (1.0 - abar);
    c.z_hat = std::sqrt(abar_prev) * beta / (1.0 - abar);
    c.noise = std::sqrt((1.0 - abar_prev) * beta / (1.0 - abar));
    return c;
}

Tensor ancestral_step(const Tensor& z_t, const Tensor& z_hat0, std::size_t t,
                      const NoiseSchedule& sched, Rng& rng) {
    const AncestralCoeffs c = ancestral_coeffs(t, sched);
    Tensor out = z_t;
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = c.z_t * z_t[i] + c.z_hat * z_hat0[i];
    }
    if (c.noise > 0.0) {
        for (auto& v : out.data()) v += c.noise * rng.normal();
    }
    return out;
}

}  // namespace silo
