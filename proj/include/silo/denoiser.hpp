#pragma once

#include <vector>

#include "silo/diffusion.hpp"
#include "silo/mlp.hpp"
#include "silo/rng.hpp"
#include "silo/tensor.hpp"

namespace silo {

// Gaussian mixture with full covariances. Components keep their
// eigendecompositions so the noised-mixture quantities at any alpha_bar
// come out in closed form:
//   C_i = abar*Sigma_i + (1-abar)I
//   E[z0 | z_t] = sum_i r_i(z_t) (mu_i + sqrt(abar) Sigma_i C_i^-1 (z_t - sqrt(abar) mu_i))
// with r_i the responsibilities of N(z_t; sqrt(abar) mu_i, C_i).
class Gmm {
  public:
    struct Component {
        double weight = 1.0;
        Tensor mean;
        Tensor cov;
        // derived
        Tensor eigvecs;  // [k, k], columns are eigenvectors
        Tensor eigvals;  // [k]
    };

    Gmm() = default;
    static Gmm from(const std::vector<double>& weights, const std::vector<Tensor>& means,
                    const std::vector<Tensor>& covs);
    static Gmm fit_em(const std::vector<Tensor>& data, std::size_t n_components,
                      std::size_t iters, Rng& rng);

    std::size_t dim() const { return dim_; }
    const std::vector<Component>& components() const { return comps_; }

    Tensor sample(Rng& rng) const;
    Tensor mixture_mean() const;
    Tensor mixture_cov() const;  // [k, k]

    Tensor posterior_mean(const Tensor& z_t, double abar) const;
    // analytic score of the noised mixture at alpha_bar
    Tensor score(const Tensor& z_t, double abar) const;
    double log_density(const Tensor& z_t, double abar) const;

    Var posterior_mean_on_tape(Tape& tape, Var z_t, double abar) const;

  private:
    struct NoisedComponent {
        Tensor shifted_mean;  // sqrt(abar) mu
        Tensor cinv;          // [k, k]
        Tensor gain;          // sqrt(abar) Sigma C^-1
        double log_norm;      // log w - 0.5 logdet C
    };
    std::vector<NoisedComponent> noised(double abar) const;

    std::size_t dim_ = 0;
    std::vector<Component> comps_;
};

enum class DenoiserBackend { Gmm, Mlp };

// Either the analytic mixture denoiser or a trained epsilon-predictor.
// t = 0 always returns the input unchanged.
class DenoiserModel {
  public:
    DenoiserModel() = default;
    static DenoiserModel from_gmm(Gmm gmm);
    static DenoiserModel from_mlp(Mlp mlp);

    DenoiserBackend backend() const { return backend_; }
    const Gmm& gmm() const { return gmm_; }
    const Mlp& mlp() const { return mlp_; }
    Mlp& mlp() { return mlp_; }

    // MLP backend only: predicted noise, inputs embedded as
    // z_t ++ [t/T, sqrt(1 - abar_t)].
    Tensor eps_predict(const Tensor& z_t, std::size_t t, const NoiseSchedule& sched) const;

    Tensor denoise(const Tensor& z_t, std::size_t t, const NoiseSchedule& sched) const;
    Var denoise_on_tape(Tape& tape, Var z_t, std::size_t t, const NoiseSchedule& sched) const;

  private:
    DenoiserBackend backend_ = DenoiserBackend::Gmm;
    Gmm gmm_;
    Mlp mlp_;
};

struct DenoiserTrainConfig {
    std::size_t hidden = 128;
    std::size_t hidden_layers = 2;
    std::size_t steps = 6000;
    std::size_t batch = 16;
    double lr = 2e-3;
    std::uint64_t seed = 11;
};

struct TrainStats {
    double initial_loss = 0.0;
    double final_loss = 0.0;  // mean over the last 100 steps
    std::vector<double> loss_curve;
};

// Standard noise-prediction objective |eps - eps_theta(z_t, t)|^2 over
// t ~ U{1..T}; aborts with the step index if the loss goes non-finite.
DenoiserModel train_mlp_denoiser(const std::vector<Tensor>& latents, const NoiseSchedule& sched,
                                 const DenoiserTrainConfig& cfg, TrainStats* stats = nullptr);

}  // namespace silo
