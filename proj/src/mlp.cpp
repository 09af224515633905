#include "silo/mlp.hpp"

#include <cmath>

#include "silo/error.hpp"

namespace silo {

Mlp Mlp::init(const std::vector<std::size_t>& sizes, Rng& rng) {
    if (sizes.size() < 2) throw ConfigError("Mlp: need at least input and output sizes");
    Mlp m;
    m.sizes = sizes;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double std = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
        m.weights.push_back(Tensor::random_normal({sizes[l + 1], sizes[l]}, 0.0, std, rng));
        m.biases.push_back(Tensor::zeros({sizes[l + 1]}));
    }
    return m;
}

Tensor Mlp::forward(const Tensor& input) const {
    Tensor h = input;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        h = add(matmul(weights[l], h), biases[l]);
        if (l + 1 < weights.size()) {
            for (auto& x : h.data()) x = std::tanh(x);
        }
    }
    return h;
}

std::vector<Var> Mlp::add_params(Tape& tape, bool trainable) const {
    std::vector<Var> vars;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        vars.push_back(trainable ? tape.leaf(weights[l]) : tape.constant(weights[l]));
        vars.push_back(trainable ? tape.leaf(biases[l]) : tape.constant(biases[l]));
    }
    return vars;
}

Var Mlp::forward_on_tape(Tape& tape, Var input, const std::vector<Var>& params) const {
    if (params.size() != 2 * weights.size()) throw ConfigError("Mlp: wrong param var count");
    Var h = input;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        h = tape.add(tape.matmul(params[2 * l], h), params[2 * l + 1]);
        if (l + 1 < weights.size()) h = tape.tanh(h);
    }
    return h;
}

Var Mlp::forward_on_tape(Tape& tape, Var input) const {
    return forward_on_tape(tape, input, add_params(tape, false));
}

std::vector<Tensor*> Mlp::params() {
    // same order as add_params
    std::vector<Tensor*> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(&weights[l]);
        out.push_back(&biases[l]);
    }
    return out;
}

std::vector<const Tensor*> Mlp::params() const {
    std::vector<const Tensor*> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(&weights[l]);
        out.push_back(&biases[l]);
    }
    return out;
}

Adam::Adam(std::vector<Tensor*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto* p : params_) {
        m_.push_back(Tensor::zeros(p->shape()));
        v_.push_back(Tensor::zeros(p->shape()));
    }
}

void Adam::step(const std::vector<Tensor>& grads) {
    if (grads.size() != params_.size()) throw ConfigError("Adam: gradient count mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = *params_[i];
        const Tensor& g = grads[i];
        for (std::size_t j = 0; j < p.numel(); ++j) {
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g[j];
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j];
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            p[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace silo
