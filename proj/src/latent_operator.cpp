#include "silo/latent_operator.hpp"

#include <cmath>

#include "silo/error.hpp"

namespace silo {

std::string variant_name(OperatorVariant v) {
    return v == OperatorVariant::TimeConditioned ? "tcond" : "tindep";
}

OperatorVariant variant_from_name(const std::string& name) {
    if (name == "tcond") return OperatorVariant::TimeConditioned;
    if (name == "tindep") return OperatorVariant::TimeIndependent;
    throw ConfigError("unknown operator variant '" + name + "' (expected tcond|tindep)");
}

LatentOperatorModel::LatentOperatorModel(OperatorVariant variant, Mlp mlp, DegradationKind kind,
                                         std::size_t latent_dim)
    : variant_(variant), mlp_(std::move(mlp)), kind_(kind), k_(latent_dim) {
    const std::size_t expect =
        k_ + (variant_ == OperatorVariant::TimeConditioned ? 3 : 1);
    if (mlp_.sizes.front() != expect || mlp_.sizes.back() != k_) {
        throw ShapeError("LatentOperatorModel: network is " + std::to_string(mlp_.sizes.front()) +
                         "->" + std::to_string(mlp_.sizes.back()) + ", expected " +
                         std::to_string(expect) + "->" + std::to_string(k_));
    }
}

Tensor LatentOperatorModel::conditioning(std::size_t t, double sigma_y,
                                         const NoiseSchedule& sched) const {
    if (variant_ == OperatorVariant::TimeConditioned) {
        return Tensor::vector({static_cast<double>(t) / static_cast<double>(sched.steps()),
                               std::sqrt(1.0 - sched.alpha_bar(t)), sigma_y});
    }
    return Tensor::vector({sigma_y});
}

Tensor LatentOperatorModel::apply(const Tensor& z_hat, std::size_t t, double sigma_y,
                                  const NoiseSchedule& sched) const {
    if (z_hat.numel() != k_) {
        throw ShapeError("operator apply: latent " + z_hat.shape_str() + " vs dim " +
                         std::to_string(k_));
    }
    std::vector<double> in = z_hat.data();
    const Tensor cond = conditioning(t, sigma_y, sched);
    in.insert(in.end(), cond.data().begin(), cond.data().end());
    return mlp_.forward(Tensor::vector(std::move(in)));
}

Var LatentOperatorModel::apply_on_tape(Tape& tape, Var z_hat, std::size_t t, double sigma_y,
                                       const NoiseSchedule& sched) const {
    Var input = tape.concat(z_hat, tape.constant(conditioning(t, sigma_y, sched)));
    return mlp_.forward_on_tape(tape, input);
}

LatentOperatorModel train_operator(const LatentCodec& codec, const DenoiserModel& denoiser,
                                   const DegradationOp& op, const NoiseSchedule& sched,
                                   const std::vector<ImageSample>& train,
                                   const OperatorTrainConfig& cfg, TrainStats* stats) {
    if (train.empty()) throw ConfigError("train_operator: empty training set");
    if (cfg.sigma_set.empty()) throw ConfigError("train_operator: empty sigma set");
    const std::size_t k = codec.latent_dim();
    Rng rng(cfg.seed);

    const std::size_t cond = cfg.variant == OperatorVariant::TimeConditioned ? 3 : 1;
    std::vector<std::size_t> sizes{k + cond};
    for (std::size_t l = 0; l < cfg.hidden_layers; ++l) sizes.push_back(cfg.hidden);
    sizes.push_back(k);
    LatentOperatorModel model(cfg.variant, Mlp::init(sizes, rng), op.kind(), k);
    Adam opt(model.mlp().params(), cfg.lr);

    Tape tape;
    if (stats) stats->loss_curve.reserve(cfg.steps);
    double tail_sum = 0.0;
    std::size_t tail_n = 0;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        tape.reset();
        auto pvars = model.mlp().add_params(tape, true);
        Var loss{};
        for (std::size_t b = 0; b < cfg.batch; ++b) {
            const ImageSample& x = train[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<int>(train.size()) - 1))];
            const double sigma_y = cfg.sigma_set[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<int>(cfg.sigma_set.size()) - 1))];
            Tensor y = op.apply(x);
            if (sigma_y > 0.0) {
                for (auto& v : y.data()) v += sigma_y * rng.normal();
            }
            Tensor target = codec.encode(op.embed_measurement(y));
            if (cfg.clamp_target) {
                target = clamp(target, LatentCodec::kMeasureClampLo, LatentCodec::kMeasureClampHi);
            }

            // pixel-space path and denoiser both stay off the tape
            const Tensor z0 = codec.encode(x);
            const std::size_t t =
                cfg.t_zero_only
                    ? 0
                    : static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(sched.steps())));
            Tensor z_hat = z0;
            if (t > 0) {
                const Tensor z_t = forward_noise(z0, t, sched, rng);
                z_hat = denoiser.denoise(z_t, t, sched);
            }

            Var out = model.mlp().forward_on_tape(
                tape,
                tape.constant([&] {
                    std::vector<double> in = z_hat.data();
                    Tensor c = cfg.variant == OperatorVariant::TimeConditioned
                                   ? Tensor::vector({static_cast<double>(t) /
                                                         static_cast<double>(sched.steps()),
                                                     std::sqrt(1.0 - sched.alpha_bar(t)), sigma_y})
                                   : Tensor::vector({sigma_y});
                    in.insert(in.end(), c.data().begin(), c.data().end());
                    return Tensor::vector(std::move(in));
                }()),
                pvars);
            Var l = tape.l1(tape.sub(tape.constant(target), out));
            loss = b == 0 ? l : tape.add(loss, l);
        }
        loss = tape.scale(loss, 1.0 / static_cast<double>(cfg.batch));
        const double loss_val = tape.value(loss)[0];
        if (!std::isfinite(loss_val)) {
            throw NumericError("train_operator: loss diverged at step " + std::to_string(step));
        }
        if (stats) {
            if (step == 0) stats->initial_loss = loss_val;
            stats->loss_curve.push_back(loss_val);
        }
        if (step + 100 >= cfg.steps) {
            tail_sum += loss_val;
            ++tail_n;
        }
        tape.backward(loss);
        std::vector<Tensor> grads;
        grads.reserve(pvars.size());
        for (Var v : pvars) grads.push_back(tape.grad(v));
        opt.step(grads);
    }
    if (stats && tail_n > 0) stats->final_loss = tail_sum / static_cast<double>(tail_n);
    return model;
}

LinearOperatorOracle linear_operator_oracle(const LatentCodec& codec, const DegradationOp& op) {
    if (!op.linear()) {
        throw UnsupportedError("linear_operator_oracle: " + kind_name(op.kind()) +
                               " is a nonlinear operator");
    }
    const std::size_t k = codec.latent_dim();
    LinearOperatorOracle oracle;
    // offset = E(embed(A(mean))), columns = E(embed(A(decode(e_j)))) - offset
    const Tensor base = codec.encode(op.embed_measurement(op.apply(codec.mean())));
    oracle.offset = base;
    oracle.matrix = Tensor::zeros({k, k});
    for (std::size_t j = 0; j < k; ++j) {
        Tensor e = Tensor::zeros({k});
        e[j] = 1.0;
        const Tensor col = codec.encode(op.embed_measurement(op.apply(codec.decode(e))));
        for (std::size_t i = 0; i < k; ++i) oracle.matrix.at(i, j) = col[i] - base[i];
    }
    return oracle;
}

Tensor LinearOperatorOracle::apply(const Tensor& z) const {
    return add(matmul(matrix, z), offset);
}

namespace {

double clamped_l1(const Tensor& a, const Tensor& b) {
    const Tensor ca = clamp(a, LatentCodec::kMeasureClampLo, LatentCodec::kMeasureClampHi);
    const Tensor cb = clamp(b, LatentCodec::kMeasureClampLo, LatentCodec::kMeasureClampHi);
    double acc = 0.0;
    for (std::size_t i = 0; i < ca.numel(); ++i) acc += std::abs(ca[i] - cb[i]);
    return acc;
}

}  // namespace

double operator_heldout_l1(const LatentOperatorModel& model, const LatentCodec& codec,
                           const DegradationOp& op, const NoiseSchedule& sched,
                           const std::vector<ImageSample>& heldout, double sigma_y,
                           std::uint64_t seed) {
    Rng rng(seed);
    double acc = 0.0;
    for (const auto& x : heldout) {
        Tensor y = op.apply(x);
        if (sigma_y > 0.0) {
            for (auto& v : y.data()) v += sigma_y * rng.normal();
        }
        const Tensor target = codec.encode(op.embed_measurement(y));
        const Tensor pred = model.apply(codec.encode(x), 0, sigma_y, sched);
        acc += clamped_l1(pred, target);
    }
    return acc / static_cast<double>(heldout.size());
}

double oracle_heldout_l1(const LinearOperatorOracle& oracle, const LatentCodec& codec,
                         const DegradationOp& op, const std::vector<ImageSample>& heldout) {
    double acc = 0.0;
    for (const auto& x : heldout) {
        const Tensor target = codec.encode(op.embed_measurement(op.apply(x)));
        const Tensor pred = oracle.apply(codec.encode(x));
        acc += clamped_l1(pred, target);
    }
    return acc / static_cast<double>(heldout.size());
}

}  // namespace silo
