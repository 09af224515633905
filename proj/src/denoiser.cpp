#include "silo/denoiser.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "silo/error.hpp"

namespace silo {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

void eigendecompose(Gmm::Component& c) {
    const auto k = static_cast<Eigen::Index>(c.mean.numel());
    Eigen::MatrixXd cov(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            cov(i, j) = c.cov.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericError("Gmm: eigendecomposition failed");
    if (eig.eigenvalues().minCoeff() <= 0.0) {
        throw NumericError("Gmm: covariance is not positive definite");
    }
    c.eigvecs = Tensor::zeros({static_cast<std::size_t>(k), static_cast<std::size_t>(k)});
    c.eigvals = Tensor::zeros({static_cast<std::size_t>(k)});
    for (Eigen::Index i = 0; i < k; ++i) {
        c.eigvals[static_cast<std::size_t>(i)] = eig.eigenvalues()(i);
        for (Eigen::Index j = 0; j < k; ++j) {
            c.eigvecs.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                eig.eigenvectors()(i, j);
        }
    }
}

// U diag(f(lambda)) U^T
Tensor spectral_map(const Gmm::Component& c, double (*f)(double, double), double abar) {
    const std::size_t k = c.mean.numel();
    Tensor out({k, k});
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            double acc = 0.0;
            for (std::size_t e = 0; e < k; ++e) {
                acc += c.eigvecs.at(i, e) * f(c.eigvals[e], abar) * c.eigvecs.at(j, e);
            }
            out.at(i, j) = acc;
        }
    }
    return out;
}

double inv_noised(double lambda, double abar) { return 1.0 / (abar * lambda + 1.0 - abar); }
double gain_noised(double lambda, double abar) {
    return lambda / (abar * lambda + 1.0 - abar);
}

}  // namespace

Gmm Gmm::from(const std::vector<double>& weights, const std::vector<Tensor>& means,
              const std::vector<Tensor>& covs) {
    if (weights.empty() || weights.size() != means.size() || weights.size() != covs.size()) {
        throw ConfigError("Gmm: weights/means/covs must be non-empty and the same length");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) throw ConfigError("Gmm: weights must be positive");
        total += w;
    }
    Gmm g;
    g.dim_ = means.front().numel();
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (means[i].numel() != g.dim_ || covs[i].ndim() != 2 ||
            covs[i].shape()[0] != g.dim_ || covs[i].shape()[1] != g.dim_) {
            throw ShapeError("Gmm: component " + std::to_string(i) + " has mismatched shapes");
        }
        Component c;
        c.weight = weights[i] / total;
        c.mean = means[i];
        c.cov = covs[i];
        eigendecompose(c);
        g.comps_.push_back(std::move(c));
    }
    return g;
}

Gmm Gmm::fit_em(const std::vector<Tensor>& data, std::size_t n_components, std::size_t iters,
                Rng& rng) {
    if (data.size() < n_components) throw ConfigError("Gmm::fit_em: fewer points than components");
    const std::size_t k = data.front().numel();
    const std::size_t n = data.size();

    // moment-matched shared covariance as the starting point
    Tensor gmean({k});
    for (const auto& x : data) gmean = add(gmean, x);
    gmean = scale(gmean, 1.0 / static_cast<double>(n));
    Tensor gcov({k, k});
    for (const auto& x : data) {
        const Tensor c = sub(x, gmean);
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) gcov.at(i, j) += c[i] * c[j];
        }
    }
    gcov = scale(gcov, 1.0 / static_cast<double>(n));
    const double reg = 1e-6 + 1e-4 * [&] {
        double tr = 0.0;
        for (std::size_t i = 0; i < k; ++i) tr += gcov.at(i, i);
        return tr / static_cast<double>(k);
    }();
    for (std::size_t i = 0; i < k; ++i) gcov.at(i, i) += reg;

    std::vector<double> weights(n_components, 1.0 / static_cast<double>(n_components));
    std::vector<Tensor> means;
    std::vector<Tensor> covs(n_components, gcov);
    for (std::size_t c = 0; c < n_components; ++c) {
        means.push_back(data[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(n) - 1))]);
    }

    std::vector<std::vector<double>> resp(n, std::vector<double>(n_components));
    for (std::size_t it = 0; it < iters; ++it) {
        Gmm cur = Gmm::from(weights, means, covs);
        // E-step at abar = 1 (the plain mixture)
        for (std::size_t s = 0; s < n; ++s) {
            const auto noised = cur.noised(1.0);
            std::vector<double> logp(n_components);
            double mx = -1e300;
            for (std::size_t c = 0; c < n_components; ++c) {
                const Tensor d = sub(data[s], noised[c].shifted_mean);
                logp[c] = noised[c].log_norm - 0.5 * dot(d, matmul(noised[c].cinv, d));
                mx = std::max(mx, logp[c]);
            }
            double z = 0.0;
            for (std::size_t c = 0; c < n_components; ++c) z += std::exp(logp[c] - mx);
            for (std::size_t c = 0; c < n_components; ++c) {
                resp[s][c] = std::exp(logp[c] - mx) / z;
            }
        }
        // M-step
        for (std::size_t c = 0; c < n_components; ++c) {
            double nc = 0.0;
            Tensor mu = Tensor::zeros({k});
            for (std::size_t s = 0; s < n; ++s) {
                nc += resp[s][c];
                mu = axpy(mu, resp[s][c], data[s]);
            }
            nc = std::max(nc, 1e-9);
            mu = scale(mu, 1.0 / nc);
            Tensor cov = Tensor::zeros({k, k});
            for (std::size_t s = 0; s < n; ++s) {
                const Tensor d = sub(data[s], mu);
                const double r = resp[s][c];
                for (std::size_t i = 0; i < k; ++i) {
                    for (std::size_t j = 0; j < k; ++j) cov.at(i, j) += r * d[i] * d[j];
                }
            }
            cov = scale(cov, 1.0 / nc);
            for (std::size_t i = 0; i < k; ++i) cov.at(i, i) += reg;
            weights[c] = nc / static_cast<double>(n);
            means[c] = mu;
            covs[c] = cov;
        }
    }
    return Gmm::from(weights, means, covs);
}

Tensor Gmm::sample(Rng& rng) const {
    double u = rng.uniform();
    std::size_t pick = comps_.size() - 1;
    for (std::size_t c = 0; c < comps_.size(); ++c) {
        if (u < comps_[c].weight) {
            pick = c;
            break;
        }
        u -= comps_[c].weight;
    }
    const Component& c = comps_[pick];
    Tensor eps({dim_});
    for (auto& v : eps.data()) v = rng.normal();
    // mean + U sqrt(Lambda) eps
    Tensor out = c.mean;
    for (std::size_t i = 0; i < dim_; ++i) {
        double acc = 0.0;
        for (std::size_t e = 0; e < dim_; ++e) {
            acc += c.eigvecs.at(i, e) * std::sqrt(c.eigvals[e]) * eps[e];
        }
        out[i] += acc;
    }
    return out;
}

Tensor Gmm::mixture_mean() const {
    Tensor m = Tensor::zeros({dim_});
    for (const auto& c : comps_) m = axpy(m, c.weight, c.mean);
    return m;
}

Tensor Gmm::mixture_cov() const {
    const Tensor m = mixture_mean();
    Tensor cov = Tensor::zeros({dim_, dim_});
    for (const auto& c : comps_) {
        for (std::size_t i = 0; i < dim_; ++i) {
            for (std::size_t j = 0; j < dim_; ++j) {
                cov.at(i, j) += c.weight * (c.cov.at(i, j) + (c.mean[i] - m[i]) *
                                                                 (c.mean[j] - m[j]));
            }
        }
    }
    return cov;
}

std::vector<Gmm::NoisedComponent> Gmm::noised(double abar) const {
    std::vector<NoisedComponent> out;
    out.reserve(comps_.size());
    for (const auto& c : comps_) {
        NoisedComponent nc;
        nc.shifted_mean = scale(c.mean, std::sqrt(abar));
        nc.cinv = spectral_map(c, inv_noised, abar);
        nc.gain = scale(spectral_map(c, gain_noised, abar), std::sqrt(abar));
        double logdet = 0.0;
        for (std::size_t e = 0; e < dim_; ++e) {
            logdet += std::log(abar * c.eigvals[e] + 1.0 - abar);
        }
        nc.log_norm = std::log(c.weight) - 0.5 * logdet;
        out.push_back(std::move(nc));
    }
    return out;
}

Tensor Gmm::posterior_mean(const Tensor& z_t, double abar) const {
    const auto nzd = noised(abar);
    std::vector<double> logp(comps_.size());
    double mx = -1e300;
    for (std::size_t c = 0; c < comps_.size(); ++c) {
        const Tensor d = sub(z_t, nzd[c].shifted_mean);
        logp[c] = nzd[c].log_norm - 0.5 * dot(d, matmul(nzd[c].cinv, d));
        mx = std::max(mx, logp[c]);
    }
    double z = 0.0;
    for (auto& lp : logp) {
        lp = std::exp(lp - mx);
        z += lp;
    }
    Tensor out = Tensor::zeros({dim_});
    for (std::size_t c = 0; c < comps_.size(); ++c) {
        const double r = logp[c] / z;
        const Tensor d = sub(z_t, nzd[c].shifted_mean);
        Tensor m = add(comps_[c].mean, matmul(nzd[c].gain, d));
        out = axpy(out, r, m);
    }
    return out;
}

Tensor Gmm::score(const Tensor& z_t, double abar) const {
    const auto nzd = noised(abar);
    std::vector<double> logp(comps_.size());
    double mx = -1e300;
    for (std::size_t c = 0; c < comps_.size(); ++c) {
        const Tensor d = sub(z_t, nzd[c].shifted_mean);
        logp[c] = nzd[c].log_norm - 0.5 * dot(d, matmul(nzd[c].cinv, d));
        mx = std::max(mx, logp[c]);
    }
    double z = 0.0;
    for (auto& lp : logp) {
        lp = std::exp(lp - mx);
        z += lp;
    }
    Tensor out = Tensor::zeros({dim_});
    for (std::size_t c = 0; c < comps_.size(); ++c) {
        const double r = logp[c] / z;
        const Tensor d = sub(z_t, nzd[c].shifted_mean);
        out = axpy(out, -r, matmul(nzd[c].cinv, d));
    }
    return out;
}

double Gmm::log_density(const Tensor& z_t, double abar) const {
    const auto nzd = noised(abar);
    double mx = -1e300;
    std::vector<double> logp(comps_.size());
    for (std::size_t c = 0; c < comps_.size(); ++c) {
        const Tensor d = sub(z_t, nzd[c].shifted_mean);
        logp[c] = nzd[c].log_norm - 0.5 * dot(d, matmul(nzd[c].cinv, d));
        mx = std::max(mx, logp[c]);
    }
    double z = 0.0;
    for (double lp : logp) z += std::exp(lp - mx);
    return mx + std::log(z) - 0.5 * static_cast<double>(dim_) * std::log(kTwoPi);
}

Var Gmm::posterior_mean_on_tape(Tape& tape, Var z_t, double abar) const {
    const auto nzd = noised(abar);
    const std::size_t nc = comps_.size();

    // responsibilities as a softmax over component log-likelihoods; the
    // max-shift enters as a constant, which leaves values and gradients
    // unchanged
    std::vector<Var> diffs(nc);
    std::vector<Var> logps(nc);
    double mx = -1e300;
    for (std::size_t c = 0; c < nc; ++c) {
        diffs[c] = tape.sub(z_t, tape.constant(nzd[c].shifted_mean));
        Var quad = tape.sum(tape.mul(diffs[c], tape.matmul(tape.constant(nzd[c].cinv), diffs[c])));
        logps[c] = tape.add(tape.scale(quad, -0.5), tape.constant(Tensor::scalar(nzd[c].log_norm)));
        mx = std::max(mx, tape.value(logps[c])[0]);
    }
    Var stacked = logps[0];
    for (std::size_t c = 1; c < nc; ++c) stacked = tape.concat(stacked, logps[c]);
    Var shifted = tape.sub(stacked, tape.constant(Tensor::full({nc}, mx)));
    Var expd = tape.exp(shifted);
    Var resp = tape.div(expd, tape.sum(expd));

    Var out{};
    for (std::size_t c = 0; c < nc; ++c) {
        Var m = tape.add(tape.constant(comps_[c].mean),
                         tape.matmul(tape.constant(nzd[c].gain), diffs[c]));
        Var term = tape.smul(tape.index(resp, c), m);
        out = c == 0 ? term : tape.add(out, term);
    }
    return out;
}

DenoiserModel DenoiserModel::from_gmm(Gmm gmm) {
    DenoiserModel m;
    m.backend_ = DenoiserBackend::Gmm;
    m.gmm_ = std::move(gmm);
    return m;
}

DenoiserModel DenoiserModel::from_mlp(Mlp mlp) {
    DenoiserModel m;
    m.backend_ = DenoiserBackend::Mlp;
    m.mlp_ = std::move(mlp);
    return m;
}

namespace {

Tensor time_embedding(std::size_t t, const NoiseSchedule& sched) {
    return Tensor::vector({static_cast<double>(t) / static_cast<double>(sched.steps()),
                           std::sqrt(1.0 - sched.alpha_bar(t))});
}

}  // namespace

Tensor DenoiserModel::eps_predict(const Tensor& z_t, std::size_t t,
                                  const NoiseSchedule& sched) const {
    if (backend_ != DenoiserBackend::Mlp) {
        throw UnsupportedError("eps_predict: only the MLP backend predicts noise");
    }
    std::vector<double> in = z_t.data();
    const Tensor emb = time_embedding(t, sched);
    in.insert(in.end(), emb.data().begin(), emb.data().end());
    return mlp_.forward(Tensor::vector(std::move(in)));
}

Tensor DenoiserModel::denoise(const Tensor& z_t, std::size_t t,
                              const NoiseSchedule& sched) const {
    if (!z_t.all_finite()) throw NumericError("denoise: non-finite latent");
    if (t == 0) return z_t;
    const double abar = sched.alpha_bar(t);
    if (backend_ == DenoiserBackend::Gmm) return gmm_.posterior_mean(z_t, abar);
    const Tensor eps = eps_predict(z_t, t, sched);
    Tensor out = z_t;
    const double s = std::sqrt(1.0 - abar);
    const double inv = 1.0 / std::sqrt(abar);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = (z_t[i] - s * eps[i]) * inv;
    return out;
}

Var DenoiserModel::denoise_on_tape(Tape& tape, Var z_t, std::size_t t,
                                   const NoiseSchedule& sched) const {
    if (!tape.value(z_t).all_finite()) throw NumericError("denoise: non-finite latent");
    if (t == 0) return z_t;
    const double abar = sched.alpha_bar(t);
    if (backend_ == DenoiserBackend::Gmm) return gmm_.posterior_mean_on_tape(tape, z_t, abar);
    Var input = tape.concat(z_t, tape.constant(time_embedding(t, sched)));
    Var eps = mlp_.forward_on_tape(tape, input);
    Var num = tape.sub(z_t, tape.scale(eps, std::sqrt(1.0 - abar)));
    return tape.scale(num, 1.0 / std::sqrt(abar));
}

DenoiserModel train_mlp_denoiser(const std::vector<Tensor>& latents, const NoiseSchedule& sched,
                                 const DenoiserTrainConfig& cfg, TrainStats* stats) {
    if (latents.empty()) throw ConfigError("train_mlp_denoiser: empty latent dataset");
    const std::size_t k = latents.front().numel();
    Rng rng(cfg.seed);
    std::vector<std::size_t> sizes{k + 2};
    for (std::size_t l = 0; l < cfg.hidden_layers; ++l) sizes.push_back(cfg.hidden);
    sizes.push_back(k);
    Mlp mlp = Mlp::init(sizes, rng);
    Adam opt(mlp.params(), cfg.lr);

    Tape tape;
    if (stats) stats->loss_curve.reserve(cfg.steps);
    double tail_sum = 0.0;
    std::size_t tail_n = 0;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        tape.reset();
        auto pvars = mlp.add_params(tape, true);
        Var loss{};
        for (std::size_t b = 0; b < cfg.batch; ++b) {
            const Tensor& z0 =
                latents[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(latents.size()) - 1))];
            const auto t = static_cast<std::size_t>(
                rng.uniform_int(1, static_cast<int>(sched.steps())));
            const double abar = sched.alpha_bar(t);
            Tensor eps({k});
            for (auto& v : eps.data()) v = rng.normal();
            Tensor z_t = axpy(scale(z0, std::sqrt(abar)), std::sqrt(1.0 - abar), eps);
            std::vector<double> in = z_t.data();
            const Tensor emb = time_embedding(t, sched);
            in.insert(in.end(), emb.data().begin(), emb.data().end());
            Var out = mlp.forward_on_tape(tape, tape.constant(Tensor::vector(std::move(in))), pvars);
            Var diff = tape.sub(tape.constant(eps), out);
            Var l = tape.sum(tape.mul(diff, diff));
            loss = b == 0 ? l : tape.add(loss, l);
        }
        loss = tape.scale(loss, 1.0 / static_cast<double>(cfg.batch));
        const double loss_val = tape.value(loss)[0];
        if (!std::isfinite(loss_val)) {
            throw NumericError("train_mlp_denoiser: loss diverged at step " +
                               std::to_string(step));
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
    return DenoiserModel::from_mlp(std::move(mlp));
}

}  // namespace silo
