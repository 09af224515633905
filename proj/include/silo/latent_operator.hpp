#pragma once

#include <vector>

#include "silo/codec.hpp"
#include "silo/degradation.hpp"
#include "silo/denoiser.hpp"
#include "silo/diffusion.hpp"
#include "silo/mlp.hpp"

namespace silo {

enum class OperatorVariant { TimeConditioned, TimeIndependent };

std::string variant_name(OperatorVariant v);
OperatorVariant variant_from_name(const std::string& name);

// Learned latent-space counterpart of a pixel-space degradation: maps a
// denoised latent (plus the diffusion time and the measurement noise level
// it was trained for) to the encoding of the degraded measurement.
class LatentOperatorModel {
  public:
    LatentOperatorModel() = default;
    LatentOperatorModel(OperatorVariant variant, Mlp mlp, DegradationKind kind,
                        std::size_t latent_dim);

    OperatorVariant variant() const { return variant_; }
    DegradationKind kind() const { return kind_; }
    std::size_t latent_dim() const { return k_; }
    const Mlp& mlp() const { return mlp_; }
    Mlp& mlp() { return mlp_; }

    Tensor apply(const Tensor& z_hat, std::size_t t, double sigma_y,
                 const NoiseSchedule& sched) const;
    Var apply_on_tape(Tape& tape, Var z_hat, std::size_t t, double sigma_y,
                      const NoiseSchedule& sched) const;

  private:
    Tensor conditioning(std::size_t t, double sigma_y, const NoiseSchedule& sched) const;

    OperatorVariant variant_ = OperatorVariant::TimeConditioned;
    Mlp mlp_;
    DegradationKind kind_ = DegradationKind::Identity;
    std::size_t k_ = 0;
};

struct OperatorTrainConfig {
    OperatorVariant variant = OperatorVariant::TimeConditioned;
    std::size_t hidden = 128;
    std::size_t hidden_layers = 2;
    std::size_t steps = 4000;
    std::size_t batch = 16;
    double lr = 1e-3;
    // noise levels the operator is conditioned on during training
    std::vector<double> sigma_set{0.0, 0.02, 0.06};
    // when false, t is drawn uniformly from {0..T}; when true, t = 0 only
    bool t_zero_only = false;
    // train against clamp(E(y)) instead of E(y)
    bool clamp_target = false;
    std::uint64_t seed = 12;
};

// Minimizes E |H(z_hat_t, t, sigma) - E(y)|_1 where, per sample, x is drawn
// from the training set, y = A(x) + noise, and z_hat_t comes from encoding,
// noising and denoising the same x. The codec and denoiser run outside the
// tape: no gradients cross the pixel space.
LatentOperatorModel train_operator(const LatentCodec& codec, const DenoiserModel& denoiser,
                                   const DegradationOp& op, const NoiseSchedule& sched,
                                   const std::vector<ImageSample>& train,
                                   const OperatorTrainConfig& cfg, TrainStats* stats = nullptr);

// Exact affine composition encode . A . decode, the best possible latent
// operator for a linear degradation at t = 0, sigma_y = 0. Used as the
// training oracle.
struct LinearOperatorOracle {
    Tensor matrix;  // [k, k]
    Tensor offset;  // [k]
    Tensor apply(const Tensor& z) const;
};
LinearOperatorOracle linear_operator_oracle(const LatentCodec& codec, const DegradationOp& op);

// Mean L1 (clamped, matching how operators are evaluated) between the model
// and the encoded measurement over held-out images at t = 0.
double operator_heldout_l1(const LatentOperatorModel& model, const LatentCodec& codec,
                           const DegradationOp& op, const NoiseSchedule& sched,
                           const std::vector<ImageSample>& heldout, double sigma_y,
                           std::uint64_t seed);
double oracle_heldout_l1(const LinearOperatorOracle& oracle, const LatentCodec& codec,
                         const DegradationOp& op, const std::vector<ImageSample>& heldout);

}  // namespace silo
