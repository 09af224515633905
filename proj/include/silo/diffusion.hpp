#pragma once

#include <cstddef>
#include <vector>

#include "silo/rng.hpp"
#include "silo/tensor.hpp"

namespace silo {

// beta/alpha/alpha_bar tables over t = 1..T, with the alpha_bar(0) = 1
// convention resolving the t = 1 boundary of the reverse update.
class NoiseSchedule {
  public:
    NoiseSchedule() = default;
    static NoiseSchedule make(std::size_t steps, double beta_start, double beta_end);

    std::size_t steps() const { return T_; }
    double beta(std::size_t t) const;       // t in 1..T
    double alpha(std::size_t t) const;      // 1 - beta_t
    double alpha_bar(std::size_t t) const;  // t in 0..T, alpha_bar(0) = 1
    double beta_start() const { return beta_start_; }
    double beta_end() const { return beta_end_; }

  private:
    std::size_t T_ = 0;
    double beta_start_ = 0.0;
    double beta_end_ = 0.0;
    std::vector<double> beta_;
    std::vector<double> alpha_bar_;  // index 0..T
};

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
Tensor forward_noise(const Tensor& z0, std::size_t t, const NoiseSchedule& sched, Rng& rng);

struct AncestralCoeffs {
    double z_t = 0.0;    // sqrt(alpha_t)(1-abar_{t-1}) / (1-abar_t)
    double z_hat = 0.0;  // sqrt(abar_{t-1}) beta_t / (1-abar_t)
    double noise = 0.0;  // sqrt((1-abar_{t-1}) beta_t / (1-abar_t)); 0 at t=1
};
AncestralCoeffs ancestral_coeffs(std::size_t t, const NoiseSchedule& sched);

// One reverse step from z_t toward z_{t-1} given the denoised estimate.
Tensor ancestral_step(const Tensor& z_t, const Tensor& z_hat0, std::size_t t,
                      const NoiseSchedule& sched, Rng& rng);

}  // namespace silo
