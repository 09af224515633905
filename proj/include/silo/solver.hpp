#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "silo/codec.hpp"
#include "silo/degradation.hpp"
#include "silo/denoiser.hpp"
#include "silo/diffusion.hpp"
#include "silo/latent_operator.hpp"

namespace silo {

enum class SolverMethod { Silo, Ldps, GmlDps, Psld, Unguided };

std::string method_name(SolverMethod m);
SolverMethod method_from_name(const std::string& name);

struct SolverConfig {
    SolverMethod method = SolverMethod::Silo;
    double eta = 0.5;     // consistency scale
    double gamma = 0.1;   // GML/PSLD auxiliary scale
    std::uint64_t seed = 1000;
    bool detach_denoiser = false;  // gradient only through the linear part of the denoised estimate
    bool squared_norm = false;     // baselines: squared consistency residual instead of its root
};

struct StepRecord {
    std::size_t t = 0;
    double guidance_norm = 0.0;  // consistency residual before the gradient step
    double step_ms = 0.0;
};

struct ReconstructionTrace {
    ImageSample xhat;
    Tensor z_final;
    std::vector<StepRecord> steps;  // one record per diffusion step
    std::uint64_t seed = 0;
    double total_ms = 0.0;
    // Codec call deltas over this run; meaningful when the run had the
    // codec to itself (batch drivers check aggregate totals instead).
    std::uint64_t encoder_calls = 0;
    std::uint64_t decoder_calls = 0;
    std::uint64_t tape_encoder_calls = 0;
    std::uint64_t tape_decoder_calls = 0;
    // Tagged autoencoder nodes observed across all guidance gradient
    // graphs of the run.
    std::uint64_t guidance_encoder_nodes = 0;
    std::uint64_t guidance_decoder_nodes = 0;
};

// Guidance in latent space through the learned operator; the autoencoder
// only embeds the measurement up front and decodes the final latent.
ReconstructionTrace solve_silo(const Measurement& m, const LatentCodec& codec,
                               const DenoiserModel& denoiser, const LatentOperatorModel& op_model,
                               const DegradationOp& op, const NoiseSchedule& sched,
                               const SolverConfig& cfg, Rng& rng);

// Pixel-space consistency: each step decodes the denoised latent and
// differentiates through degradation and decoder.
ReconstructionTrace solve_ldps(const Measurement& m, const LatentCodec& codec,
                               const DenoiserModel& denoiser, const DegradationOp& op,
                               const NoiseSchedule& sched, const SolverConfig& cfg, Rng& rng);

// LDPS plus gamma * grad |z_hat - E(D(z_hat))|^2.
ReconstructionTrace solve_gmldps(const Measurement& m, const LatentCodec& codec,
                                 const DenoiserModel& denoiser, const DegradationOp& op,
                                 const NoiseSchedule& sched, const SolverConfig& cfg, Rng& rng);

// LDPS plus gamma * grad |z_hat - E(A^T y + (I - A^T A) D(z_hat))|^2.
// Linear operators only.
ReconstructionTrace solve_psld(const Measurement& m, const LatentCodec& codec,
                               const DenoiserModel& denoiser, const DegradationOp& op,
                               const NoiseSchedule& sched, const SolverConfig& cfg, Rng& rng);

// Prior sampling; consumes the same random stream as the guided methods.
ReconstructionTrace solve_unguided(const Measurement& m, const LatentCodec& codec,
                                   const DenoiserModel& denoiser, const DegradationOp& op,
                                   const NoiseSchedule& sched, const SolverConfig& cfg, Rng& rng);

// Dispatch by cfg.method. SILO requires op_model; baselines ignore it.
ReconstructionTrace solve(const Measurement& m, const LatentCodec& codec,
                          const DenoiserModel& denoiser, const LatentOperatorModel* op_model,
                          const DegradationOp& op, const NoiseSchedule& sched,
                          const SolverConfig& cfg, Rng& rng);

// d|y - A(D(z_hat))|^2 / d z_hat for a linear degradation.
Tensor decoder_gradient_field(const Tensor& z_hat, const Tensor& y, const LatentCodec& codec,
                              const DegradationOp& op);

struct DiagnosticRecord {
    std::size_t t = 0;
    Tensor field;  // gradient w.r.t. the denoised latent, one value per channel
    double norm = 0.0;
    double max_abs = 0.0;
};

struct DiagnosticReport {
    std::vector<DiagnosticRecord> records;
    ReconstructionTrace trace;
};

// Records the decoder-path gradient field at the requested timesteps while
// an LDPS reconstruction runs.
DiagnosticReport decoder_gradient_diagnostic(const Measurement& m, const LatentCodec& codec,
                                             const DenoiserModel& denoiser,
                                             const DegradationOp& op, const NoiseSchedule& sched,
                                             const SolverConfig& cfg,
                                             const std::vector<std::size_t>& timesteps, Rng& rng);

// Spec default step sizes per method and task.
double default_eta(SolverMethod method, DegradationKind kind);
double default_gamma(SolverMethod method);

}  // namespace silo
