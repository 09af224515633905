#include "silo/solver.hpp"

#include <chrono>
#include <cmath>

#include "silo/error.hpp"

namespace silo {

std::string method_name(SolverMethod m) {
    switch (m) {
        case SolverMethod::Silo: return "silo";
        case SolverMethod::Ldps: return "ldps";
        case SolverMethod::GmlDps: return "gml";
        case SolverMethod::Psld: return "psld";
        case SolverMethod::Unguided: return "unguided";
    }
    return "?";
}

SolverMethod method_from_name(const std::string& name) {
    if (name == "silo") return SolverMethod::Silo;
    if (name == "ldps") return SolverMethod::Ldps;
    if (name == "gml") return SolverMethod::GmlDps;
    if (name == "psld") return SolverMethod::Psld;
    if (name == "unguided") return SolverMethod::Unguided;
    throw ConfigError("unknown method '" + name + "' (expected silo|ldps|gml|psld|unguided)");
}

double default_eta(SolverMethod method, DegradationKind kind) {
    if (method == SolverMethod::Unguided) return 0.0;
    if (method == SolverMethod::Silo) {
        return kind == DegradationKind::BoxInpaint ? 1.0 : 0.5;
    }
    // frozen after a one-off sweep on a 20-image validation split
    return 0.6;
}

double default_gamma(SolverMethod method) {
    return method == SolverMethod::GmlDps || method == SolverMethod::Psld ? 0.1 : 0.0;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Denoised estimate on the tape. Detached variant keeps the network out of
// the graph: z_hat = z_t / sqrt(abar) + const, so only the closed-form part
// carries gradient.
Var taped_denoise(Tape& tape, Var z_t_var, const Tensor& z_t, std::size_t t,
                  const DenoiserModel& denoiser, const NoiseSchedule& sched,
                  bool detach) {
    if (!detach) return denoiser.denoise_on_tape(tape, z_t_var, t, sched);
    const double inv = 1.0 / std::sqrt(sched.alpha_bar(t));
    const Tensor z_hat = denoiser.denoise(z_t, t, sched);
    const Tensor shift = sub(z_hat, scale(z_t, inv));
    return tape.add(tape.scale(z_t_var, inv), tape.constant(shift));
}

struct GuidanceResult {
    Tensor gradient;      // already scaled by eta/gamma
    double residual = 0.0;  // consistency residual norm
    Tensor z_hat;         // denoised estimate (numeric)
};

GuidanceResult silo_guidance(Tape& tape, const Tensor& z_t, const Tensor& w,
                             const Measurement& m, const DenoiserModel& denoiser,
                             const LatentOperatorModel& op_model, std::size_t t,
                             const NoiseSchedule& sched, const SolverConfig& cfg) {
    tape.reset();
    Var z_var = tape.leaf(z_t);
    Var z_hat = taped_denoise(tape, z_var, z_t, t, denoiser, sched, cfg.detach_denoiser);
    Var w_hat = op_model.apply_on_tape(tape, z_hat, t, m.sigma_y, sched);
    Var resid = tape.sub(tape.constant(w), w_hat);
    Var norm = tape.l2norm(resid);
    tape.backward(norm);
    GuidanceResult res;
    res.gradient = scale(tape.grad(z_var), cfg.eta);
    res.residual = tape.value(norm)[0];
    res.z_hat = tape.value(z_hat);
    return res;
}

GuidanceResult bidomain_guidance(Tape& tape, const Tensor& z_t, const Measurement& m,
                                 const LatentCodec& codec, const DenoiserModel& denoiser,
                                 const DegradationOp& op, std::size_t t,
                                 const NoiseSchedule& sched, const SolverConfig& cfg,
                                 SolverMethod method, const Tensor* aty,
                                 const Tensor* complement) {
    tape.reset();
    Var z_var = tape.leaf(z_t);
    Var z_hat = taped_denoise(tape, z_var, z_t, t, denoiser, sched, cfg.detach_denoiser);
    Var decoded = codec.decode_on_tape(tape, z_hat);
    Var applied = op.apply_on_tape(tape, decoded);
    Var resid = tape.sub(tape.constant(m.y), applied);
    Var consistency =
        cfg.squared_norm ? tape.sum(tape.mul(resid, resid)) : tape.l2norm(resid);
    Var objective = tape.scale(consistency, cfg.eta);

    if (method == SolverMethod::GmlDps) {
        Var reenc = codec.encode_on_tape(tape, decoded);
        Var fp = tape.sub(z_hat, reenc);
        objective = tape.add(objective, tape.scale(tape.sum(tape.mul(fp, fp)), cfg.gamma));
    } else if (method == SolverMethod::Psld) {
        Var projected = tape.add(tape.constant(*aty),
                                 tape.matmul(tape.constant(*complement), decoded));
        Var target = codec.encode_on_tape(tape, projected);
        Var pr = tape.sub(z_hat, target);
        objective = tape.add(objective, tape.scale(tape.sum(tape.mul(pr, pr)), cfg.gamma));
    }
    tape.backward(objective);
    GuidanceResult res;
    res.gradient = tape.grad(z_var);
    res.residual = cfg.squared_norm ? std::sqrt(tape.value(consistency)[0])
                                    : tape.value(consistency)[0];
    res.z_hat = tape.value(z_hat);
    return res;
}

struct RunContext {
    const Measurement& m;
    const LatentCodec& codec;
    const DenoiserModel& denoiser;
    const DegradationOp& op;
    const NoiseSchedule& sched;
    const SolverConfig& cfg;
    SolverMethod method;
    const LatentOperatorModel* op_model = nullptr;
    // diagnostics hook (may be null)
    const std::vector<std::size_t>* diag_timesteps = nullptr;
    std::vector<DiagnosticRecord>* diag_out = nullptr;
};

ReconstructionTrace run_solver(const RunContext& ctx, Rng& rng) {
    const auto& cfg = ctx.cfg;
    const auto& sched = ctx.sched;
    const std::size_t k = ctx.codec.latent_dim();
    const auto run_start = Clock::now();
    const auto counts_before = ctx.codec.counts();

    ReconstructionTrace trace;
    trace.seed = cfg.seed;
    trace.steps.reserve(sched.steps());

    const bool guided = ctx.method != SolverMethod::Unguided && cfg.eta != 0.0;
    const bool aux_guided = (ctx.method == SolverMethod::GmlDps ||
                             ctx.method == SolverMethod::Psld) &&
                            cfg.gamma != 0.0;

    Tensor w;
    if (ctx.method == SolverMethod::Silo && guided) {
        w = ctx.codec.encode_measure(ctx.op.embed_measurement(ctx.m.y));
    }
    Tensor aty, complement;
    if (ctx.method == SolverMethod::Psld) {
        const Tensor& A = ctx.op.as_matrix();  // throws for nonlinear kinds
        const std::size_t d = ctx.op.input_dim();
        const std::size_t dp = ctx.op.output_dim();
        aty = Tensor::zeros({d});
        for (std::size_t i = 0; i < dp; ++i) {
            for (std::size_t j = 0; j < d; ++j) aty[j] += A.at(i, j) * ctx.m.y[i];
        }
        complement = Tensor::identity(d);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                double ata = 0.0;
                for (std::size_t r = 0; r < dp; ++r) ata += A.at(r, i) * A.at(r, j);
                complement.at(i, j) -= ata;
            }
        }
    }

    Tensor z({k});
    for (auto& v : z.data()) v = rng.normal();

    Tape tape;
    for (std::size_t t = sched.steps(); t >= 1; --t) {
        const auto step_start = Clock::now();
        StepRecord rec;
        rec.t = t;

        Tensor z_hat;
        Tensor grad;
        if (guided || aux_guided) {
            GuidanceResult g;
            if (ctx.method == SolverMethod::Silo) {
                g = silo_guidance(tape, z, w, ctx.m, ctx.denoiser, *ctx.op_model, t, sched, cfg);
                if (tape.count_tag(NodeTag::Encoder) != 0 ||
                    tape.count_tag(NodeTag::Decoder) != 0) {
                    throw Error("solve_silo: autoencoder node leaked into a guidance graph");
                }
            } else {
                g = bidomain_guidance(tape, z, ctx.m, ctx.codec, ctx.denoiser, ctx.op, t, sched,
                                      cfg, ctx.method, aty.numel() ? &aty : nullptr,
                                      complement.numel() ? &complement : nullptr);
            }
            trace.guidance_encoder_nodes += tape.count_tag(NodeTag::Encoder);
            trace.guidance_decoder_nodes += tape.count_tag(NodeTag::Decoder);
            z_hat = std::move(g.z_hat);
            grad = std::move(g.gradient);
            rec.guidance_norm = g.residual;
        } else {
            z_hat = ctx.denoiser.denoise(z, t, sched);
        }

        if (ctx.diag_timesteps && ctx.diag_out) {
            for (std::size_t want : *ctx.diag_timesteps) {
                if (want != t) continue;
                DiagnosticRecord dr;
                dr.t = t;
                dr.field = decoder_gradient_field(z_hat, ctx.m.y, ctx.codec, ctx.op);
                dr.norm = l2norm(dr.field);
                for (double v : dr.field.data()) dr.max_abs = std::max(dr.max_abs, std::abs(v));
                ctx.diag_out->push_back(std::move(dr));
            }
        }

        z = ancestral_step(z, z_hat, t, sched, rng);
        if (grad.numel()) z = sub(z, grad);
        if (!z.all_finite()) {
            throw NumericError("solver: non-finite latent at t=" + std::to_string(t));
        }
        rec.step_ms = ms_since(step_start);
        trace.steps.push_back(rec);
    }

    trace.z_final = z;
    // single decode, clamped only at image emission
    Tensor pixels = clamp(ctx.codec.decode(z), -1.0, 1.0);
    trace.xhat = image_from_tensor(pixels, ctx.op.image_size(), ctx.m.source_seed);
    trace.total_ms = ms_since(run_start);

    const auto counts_after = ctx.codec.counts();
    trace.encoder_calls = counts_after.encode - counts_before.encode;
    trace.decoder_calls = counts_after.decode - counts_before.decode;
    trace.tape_encoder_calls = counts_after.tape_encode - counts_before.tape_encode;
    trace.tape_decoder_calls = counts_after.tape_decode - counts_before.tape_decode;
    return trace;
}

}  // namespace

ReconstructionTrace solve_silo(const Measurement& m, const LatentCodec& codec,
                               const DenoiserModel& denoiser, const LatentOperatorModel& op_model,
                               const DegradationOp& op, const NoiseSchedule& sched,
                               const SolverConfig& cfg, Rng& rng) {
    if (op_model.kind() != op.kind()) {
        throw ConfigError("solve_silo: operator model was trained for " +
                          kind_name(op_model.kind()) + ", measurement is " + kind_name(op.kind()));
    }
    RunContext ctx{m, codec, denoiser, op, sched, cfg, SolverMethod::Silo, &op_model};
    return run_solver(ctx, rng);
}

ReconstructionTrace solve_ldps(const Measurement& m, const LatentCodec& codec,
                               const DenoiserModel& denoiser, const DegradationOp& op,
                               const NoiseSchedule& sched, const SolverConfig& cfg, Rng& rng) {
    RunContext ctx{m, codec, denoiser, op, sched, cfg, SolverMethod::Ldps};
    return run_solver(ctx, rng);
}

ReconstructionTrace solve_gmldps(const Measurement& m, const LatentCodec& codec,
                                 const DenoiserModel& denoiser, const DegradationOp& op,
                                 const NoiseSchedule& sched, const SolverConfig& cfg, Rng& rng) {
    RunContext ctx{m, codec, denoiser, op, sched, cfg, SolverMethod::GmlDps};
    return run_solver(ctx, rng);
}

ReconstructionTrace solve_psld(const Measurement& m, const LatentCodec& codec,
                               const DenoiserModel& denoiser, const DegradationOp& op,
                               const NoiseSchedule& sched, const SolverConfig& cfg, Rng& rng) {
    if (!op.linear()) {
        throw UnsupportedError("solve_psld: cannot run on nonlinear operator " +
                               kind_name(op.kind()));
    }
    RunContext ctx{m, codec, denoiser, op, sched, cfg, SolverMethod::Psld};
    return run_solver(ctx, rng);
}

ReconstructionTrace solve_unguided(const Measurement& m, const LatentCodec& codec,
                                   const DenoiserModel& denoiser, const DegradationOp& op,
                                   const NoiseSchedule& sched, const SolverConfig& cfg, Rng& rng) {
    RunContext ctx{m, codec, denoiser, op, sched, cfg, SolverMethod::Unguided};
    return run_solver(ctx, rng);
}

ReconstructionTrace solve(const Measurement& m, const LatentCodec& codec,
                          const DenoiserModel& denoiser, const LatentOperatorModel* op_model,
                          const DegradationOp& op, const NoiseSchedule& sched,
                          const SolverConfig& cfg, Rng& rng) {
    switch (cfg.method) {
        case SolverMethod::Silo:
            if (!op_model) throw ConfigError("solve: silo needs a trained latent operator");
            return solve_silo(m, codec, denoiser, *op_model, op, sched, cfg, rng);
        case SolverMethod::Ldps:
            return solve_ldps(m, codec, denoiser, op, sched, cfg, rng);
        case SolverMethod::GmlDps:
            return solve_gmldps(m, codec, denoiser, op, sched, cfg, rng);
        case SolverMethod::Psld:
            return solve_psld(m, codec, denoiser, op, sched, cfg, rng);
        case SolverMethod::Unguided:
            return solve_unguided(m, codec, denoiser, op, sched, cfg, rng);
    }
    throw Error("solve: unreachable");
}

Tensor decoder_gradient_field(const Tensor& z_hat, const Tensor& y, const LatentCodec& codec,
                              const DegradationOp& op) {
    if (!op.linear()) {
        throw UnsupportedError("decoder_gradient_field: requires a linear operator, got " +
                               kind_name(op.kind()));
    }
    Tape tape;
    Var z_var = tape.leaf(z_hat);
    Var decoded = codec.decode_on_tape(tape, z_var);
    Var applied = op.apply_on_tape(tape, decoded);
    Var resid = tape.sub(tape.constant(y), applied);
    Var obj = tape.sum(tape.mul(resid, resid));
    tape.backward(obj);
    return tape.grad(z_var);
}

DiagnosticReport decoder_gradient_diagnostic(const Measurement& m, const LatentCodec& codec,
                                             const DenoiserModel& denoiser,
                                             const DegradationOp& op, const NoiseSchedule& sched,
                                             const SolverConfig& cfg,
                                             const std::vector<std::size_t>& timesteps, Rng& rng) {
    if (!op.linear()) {
        throw UnsupportedError("diagnostic: requires a linear operator, got " +
                               kind_name(op.kind()));
    }
    DiagnosticReport report;
    SolverConfig ldps_cfg = cfg;
    ldps_cfg.method = SolverMethod::Ldps;
    RunContext ctx{m, codec, denoiser, op, sched, ldps_cfg, SolverMethod::Ldps};
    ctx.diag_timesteps = &timesteps;
    ctx.diag_out = &report.records;
    report.trace = run_solver(ctx, rng);
    return report;
}

}  // namespace silo
