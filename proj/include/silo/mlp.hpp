#pragma once

#include <vector>

#include "silo/rng.hpp"
#include "silo/tensor.hpp"

namespace silo {

// Fully connected net with tanh hidden activations and a linear head.
struct Mlp {
    std::vector<std::size_t> sizes;  // input, hidden..., output
    std::vector<Tensor> weights;     // [out, in] per layer
    std::vector<Tensor> biases;      // [out] per layer

    static Mlp init(const std::vector<std::size_t>& sizes, Rng& rng);

    Tensor forward(const Tensor& input) const;

    // Puts the parameters on the tape once (as gradient leaves when
    // trainable, as constants otherwise) so a batch of forwards can share
    // them. Order: W0, b0, W1, b1, ...
    std::vector<Var> add_params(Tape& tape, bool trainable) const;
    Var forward_on_tape(Tape& tape, Var input, const std::vector<Var>& params) const;
    // single inference forward, parameters as constants
    Var forward_on_tape(Tape& tape, Var input) const;

    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;
};

// Adam with bias correction; state is owned here, parameters live in the model.
class Adam {
  public:
    Adam(std::vector<Tensor*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    void step(const std::vector<Tensor>& grads);
    double lr() const { return lr_; }

  private:
    std::vector<Tensor*> params_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace silo
