#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "silo/error.hpp"
#include "silo/rng.hpp"

namespace silo {

// Dense row-major array of 64-bit floats. Immutable by convention once
// handed to a Tape; all mutation happens at construction sites.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor scalar(double value);
    static Tensor vector(std::vector<double> data);
    static Tensor identity(std::size_t n);
    static Tensor random_uniform(std::vector<std::size_t> shape, double lo, double hi, Rng& rng);
    static Tensor random_normal(std::vector<std::size_t> shape, double mean, double std, Rng& rng);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t numel() const { return data_.size(); }
    std::size_t ndim() const { return shape_.size(); }
    bool is_scalar() const { return data_.size() == 1; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    // 2-D accessor, row-major
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    std::string shape_str() const;

  private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Plain (untaped) arithmetic used throughout the numeric paths.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
double dot(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);
double l2norm(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
// a + c*b
Tensor axpy(const Tensor& a, double c, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

enum class OpKind {
    Leaf,
    Add,
    Sub,
    Mul,
    SMul,   // scalar node * tensor node
    MatMul,
    Scale,  // constant * tensor
    Sum,
    Mean,
    Relu,
    Tanh,
    Exp,
    Div,    // elementwise, or tensor / scalar node
    L1,
    L2Norm,
    Clamp,
    Concat,
    Index,
    StRound,  // quantize with pass-through gradient
};

const char* op_name(OpKind k);

// Marks tape nodes that realize the autoencoder so structural tests can
// prove a gradient graph never touches it.
enum class NodeTag : unsigned char { None, Encoder, Decoder };

// Handle into a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode gradient tape. Nodes are appended in topological order by
// construction (operands always precede results). Single-owner: a Tape is
// never shared across threads.
class Tape {
  public:
    Tape() = default;

    // Leaf that participates in gradients.
    Var leaf(Tensor value, NodeTag tag = NodeTag::None);
    // Leaf treated as a constant: backward never propagates into it.
    Var constant(Tensor value, NodeTag tag = NodeTag::None);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    // scalar node * tensor node
    Var smul(Var s, Var a);
    Var matmul(Var a, Var b);
    Var scale(Var a, double c);
    Var sum(Var a);
    Var mean(Var a);
    Var relu(Var a);
    Var tanh(Var a);
    Var exp(Var a);
    // b must match a's shape or be scalar
    Var div(Var a, Var b);
    Var l1(Var a);
    Var l2norm(Var a);
    Var clamp(Var a, double lo, double hi);
    Var concat(Var a, Var b);
    Var index(Var a, std::size_t i);
    // round(a_i / q_i) * q_i with identity gradient
    Var st_round(Var a, Tensor quant_steps);

    // Accumulates d(root)/d(node) into every gradient-requiring node
    // reachable from root. root must be scalar-valued.
    void backward(Var root);

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    // Zero tensor of the node's shape when no gradient reached it.
    Tensor grad(Var v) const;

    std::size_t size() const { return nodes_.size(); }
    std::size_t count_tag(NodeTag tag) const;
    // Keeps buffers, drops nodes; for per-step reuse inside solvers.
    void reset();

  private:
    struct Node {
        OpKind kind = OpKind::Leaf;
        int a = -1;
        int b = -1;
        Tensor value;
        Tensor grad;
        bool has_grad = false;
        bool requires_grad = false;
        double c0 = 0.0;
        double c1 = 0.0;
        Tensor aux;
        NodeTag tag = NodeTag::None;
    };

    int push(Node n);
    Var unary(OpKind k, Var a, Tensor value, double c0 = 0.0, double c1 = 0.0);
    Var binary(OpKind k, Var a, Var b, Tensor value);
    void accumulate(int id, const Tensor& g);
    void check_id(Var v) const;

    std::vector<Node> nodes_;
};

}  // namespace silo
