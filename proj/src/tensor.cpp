#include "silo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace silo {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op) + ": shape mismatch (" + a.shape_str() + " vs " +
                     b.shape_str() + ")");
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
        throw ShapeError("Tensor: " + shape_str() + " does not hold " +
                         std::to_string(data_.size()) + " values");
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::vector(std::vector<double> data) {
    auto n = data.size();
    return Tensor({n}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

Tensor Tensor::random_uniform(std::vector<std::size_t> shape, double lo, double hi, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = rng.uniform(lo, hi);
    return t;
}

Tensor Tensor::random_normal(std::vector<std::size_t> shape, double mean, double std, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = rng.normal(mean, std);
    return t;
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) shape_fail("add", a, b);
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) shape_fail("sub", a, b);
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) shape_fail("mul", a, b);
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b[i];
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c;
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2) shape_fail("matmul", a, b);
    const std::size_t m = a.shape()[0];
    const std::size_t n = a.shape()[1];
    if (b.ndim() == 1) {
        if (b.shape()[0] != n) shape_fail("matmul", a, b);
        Tensor out({m});
        for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += a.at(i, j) * b[j];
            out[i] = acc;
        }
        return out;
    }
    if (b.ndim() != 2 || b.shape()[0] != n) shape_fail("matmul", a, b);
    const std::size_t p = b.shape()[1];
    Tensor out({m, p});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double av = a.at(i, j);
            if (av == 0.0) continue;
            for (std::size_t k = 0; k < p; ++k) out.at(i, k) += av * b.at(j, k);
        }
    }
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) shape_fail("dot", a, b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
    return acc;
}

double sum(const Tensor& a) {
    return std::accumulate(a.data().begin(), a.data().end(), 0.0);
}

double l2norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

Tensor clamp(const Tensor& a, double lo, double hi) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(out[i], lo, hi);
    return out;
}

Tensor axpy(const Tensor& a, double c, const Tensor& b) {
    if (!a.same_shape(b)) shape_fail("axpy", a, b);
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += c * b[i];
    return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) shape_fail("max_abs_diff", a, b);
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::Leaf: return "leaf";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::SMul: return "smul";
        case OpKind::MatMul: return "matmul";
        case OpKind::Scale: return "scale";
        case OpKind::Sum: return "sum";
        case OpKind::Mean: return "mean";
        case OpKind::Relu: return "relu";
        case OpKind::Tanh: return "tanh";
        case OpKind::Exp: return "exp";
        case OpKind::Div: return "div";
        case OpKind::L1: return "l1";
        case OpKind::L2Norm: return "l2norm";
        case OpKind::Clamp: return "clamp";
        case OpKind::Concat: return "concat";
        case OpKind::Index: return "index";
        case OpKind::StRound: return "st_round";
    }
    return "?";
}

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check_id(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
        throw Error("Tape: invalid node handle");
    }
}

Var Tape::leaf(Tensor value, NodeTag tag) {
    Node n;
    n.kind = OpKind::Leaf;
    n.value = std::move(value);
    n.requires_grad = true;
    n.tag = tag;
    return {push(std::move(n))};
}

Var Tape::constant(Tensor value, NodeTag tag) {
    Node n;
    n.kind = OpKind::Leaf;
    n.value = std::move(value);
    n.requires_grad = false;
    n.tag = tag;
    return {push(std::move(n))};
}

Var Tape::unary(OpKind k, Var a, Tensor value, double c0, double c1) {
    check_id(a);
    Node n;
    n.kind = k;
    n.a = a.id;
    n.value = std::move(value);
    n.c0 = c0;
    n.c1 = c1;
    n.requires_grad = nodes_[a.id].requires_grad;
    return {push(std::move(n))};
}

Var Tape::binary(OpKind k, Var a, Var b, Tensor value) {
    check_id(a);
    check_id(b);
    Node n;
    n.kind = k;
    n.a = a.id;
    n.b = b.id;
    n.value = std::move(value);
    n.requires_grad = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    return {push(std::move(n))};
}

Var Tape::add(Var a, Var b) { return binary(OpKind::Add, a, b, silo::add(value(a), value(b))); }
Var Tape::sub(Var a, Var b) { return binary(OpKind::Sub, a, b, silo::sub(value(a), value(b))); }
Var Tape::mul(Var a, Var b) { return binary(OpKind::Mul, a, b, silo::mul(value(a), value(b))); }

Var Tape::smul(Var s, Var a) {
    check_id(s);
    if (!value(s).is_scalar()) {
        throw ShapeError("smul: scalar operand has shape " + value(s).shape_str());
    }
    return binary(OpKind::SMul, s, a, silo::scale(value(a), value(s)[0]));
}

Var Tape::matmul(Var a, Var b) {
    return binary(OpKind::MatMul, a, b, silo::matmul(value(a), value(b)));
}

Var Tape::scale(Var a, double c) { return unary(OpKind::Scale, a, silo::scale(value(a), c), c); }

Var Tape::sum(Var a) { return unary(OpKind::Sum, a, Tensor::scalar(silo::sum(value(a)))); }

Var Tape::mean(Var a) {
    const auto& v = value(a);
    return unary(OpKind::Mean, a, Tensor::scalar(silo::sum(v) / static_cast<double>(v.numel())));
}

Var Tape::relu(Var a) {
    Tensor out = value(a);
    for (auto& x : out.data()) x = x > 0.0 ? x : 0.0;
    return unary(OpKind::Relu, a, std::move(out));
}

Var Tape::tanh(Var a) {
    Tensor out = value(a);
    for (auto& x : out.data()) x = std::tanh(x);
    return unary(OpKind::Tanh, a, std::move(out));
}

Var Tape::exp(Var a) {
    Tensor out = value(a);
    for (auto& x : out.data()) x = std::exp(x);
    return unary(OpKind::Exp, a, std::move(out));
}

Var Tape::div(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv) && !bv.is_scalar()) shape_fail("div", av, bv);
    Tensor out = av;
    if (bv.is_scalar()) {
        for (auto& x : out.data()) x /= bv[0];
    } else {
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= bv[i];
    }
    return binary(OpKind::Div, a, b, std::move(out));
}

Var Tape::l1(Var a) {
    double acc = 0.0;
    for (double x : value(a).data()) acc += std::abs(x);
    return unary(OpKind::L1, a, Tensor::scalar(acc));
}

Var Tape::l2norm(Var a) {
    return unary(OpKind::L2Norm, a, Tensor::scalar(silo::l2norm(value(a))));
}

Var Tape::clamp(Var a, double lo, double hi) {
    return unary(OpKind::Clamp, a, silo::clamp(value(a), lo, hi), lo, hi);
}

Var Tape::concat(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (av.ndim() != 1 || bv.ndim() != 1) shape_fail("concat", av, bv);
    std::vector<double> data = av.data();
    data.insert(data.end(), bv.data().begin(), bv.data().end());
    return binary(OpKind::Concat, a, b, Tensor::vector(std::move(data)));
}

Var Tape::index(Var a, std::size_t i) {
    const Tensor& av = value(a);
    if (i >= av.numel()) {
        throw ShapeError("index: position " + std::to_string(i) + " out of " + av.shape_str());
    }
    return unary(OpKind::Index, a, Tensor::scalar(av[i]), static_cast<double>(i));
}

Var Tape::st_round(Var a, Tensor quant_steps) {
    const Tensor& av = value(a);
    if (!av.same_shape(quant_steps)) shape_fail("st_round", av, quant_steps);
    Tensor out = av;
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = std::round(out[i] / quant_steps[i]) * quant_steps[i];
    }
    Var v = unary(OpKind::StRound, a, std::move(out));
    nodes_[v.id].aux = std::move(quant_steps);
    return v;
}

void Tape::accumulate(int id, const Tensor& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
        n.grad = g;
        n.has_grad = true;
    } else {
        for (std::size_t i = 0; i < g.numel(); ++i) n.grad[i] += g[i];
    }
}

Tensor Tape::grad(Var v) const {
    check_id(v);
    const Node& n = nodes_[v.id];
    if (n.has_grad) return n.grad;
    return Tensor::zeros(n.value.shape());
}

std::size_t Tape::count_tag(NodeTag tag) const {
    std::size_t c = 0;
    for (const auto& n : nodes_) {
        if (n.tag == tag) ++c;
    }
    return c;
}

void Tape::reset() { nodes_.clear(); }

void Tape::backward(Var root) {
    check_id(root);
    if (!value(root).is_scalar()) {
        throw ShapeError("backward: root must be scalar, got " + value(root).shape_str());
    }
    for (auto& n : nodes_) {
        n.has_grad = false;
    }
    nodes_[root.id].grad = Tensor::scalar(1.0);
    nodes_[root.id].has_grad = true;
    if (!nodes_[root.id].requires_grad) return;  // constant root: all grads zero

    for (int id = root.id; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.has_grad || n.kind == OpKind::Leaf) continue;
        const Tensor& g = n.grad;
        const Node& na = nodes_[n.a];
        switch (n.kind) {
            case OpKind::Add:
                accumulate(n.a, g);
                accumulate(n.b, g);
                break;
            case OpKind::Sub: {
                accumulate(n.a, g);
                if (nodes_[n.b].requires_grad) accumulate(n.b, silo::scale(g, -1.0));
                break;
            }
            case OpKind::Mul:
                if (na.requires_grad) accumulate(n.a, silo::mul(g, nodes_[n.b].value));
                if (nodes_[n.b].requires_grad) accumulate(n.b, silo::mul(g, na.value));
                break;
            case OpKind::SMul: {
                const Node& nb = nodes_[n.b];
                if (na.requires_grad) accumulate(n.a, Tensor::scalar(silo::dot(g, nb.value)));
                if (nb.requires_grad) accumulate(n.b, silo::scale(g, na.value[0]));
                break;
            }
            case OpKind::MatMul: {
                const Node& nb = nodes_[n.b];
                const Tensor& A = na.value;
                const Tensor& B = nb.value;
                const std::size_t m = A.shape()[0];
                const std::size_t k = A.shape()[1];
                if (B.ndim() == 1) {
                    if (na.requires_grad) {
                        Tensor dA({m, k});
                        for (std::size_t i = 0; i < m; ++i) {
                            for (std::size_t j = 0; j < k; ++j) dA.at(i, j) = g[i] * B[j];
                        }
                        accumulate(n.a, dA);
                    }
                    if (nb.requires_grad) {
                        Tensor dB({k});
                        for (std::size_t i = 0; i < m; ++i) {
                            const double gi = g[i];
                            if (gi == 0.0) continue;
                            for (std::size_t j = 0; j < k; ++j) dB[j] += gi * A.at(i, j);
                        }
                        accumulate(n.b, dB);
                    }
                } else {
                    const std::size_t p = B.shape()[1];
                    if (na.requires_grad) {
                        Tensor dA({m, k});
                        for (std::size_t i = 0; i < m; ++i) {
                            for (std::size_t j = 0; j < k; ++j) {
                                double acc = 0.0;
                                for (std::size_t c = 0; c < p; ++c) {
                                    acc += g.at(i, c) * B.at(j, c);
                                }
                                dA.at(i, j) = acc;
                            }
                        }
                        accumulate(n.a, dA);
                    }
                    if (nb.requires_grad) {
                        Tensor dB({k, p});
                        for (std::size_t j = 0; j < k; ++j) {
                            for (std::size_t i = 0; i < m; ++i) {
                                const double av = A.at(i, j);
                                if (av == 0.0) continue;
                                for (std::size_t c = 0; c < p; ++c) {
                                    dB.at(j, c) += av * g.at(i, c);
                                }
                            }
                        }
                        accumulate(n.b, dB);
                    }
                }
                break;
            }
            case OpKind::Scale:
                accumulate(n.a, silo::scale(g, n.c0));
                break;
            case OpKind::Sum:
                accumulate(n.a, Tensor::full(na.value.shape(), g[0]));
                break;
            case OpKind::Mean:
                accumulate(n.a, Tensor::full(na.value.shape(),
                                             g[0] / static_cast<double>(na.value.numel())));
                break;
            case OpKind::Relu: {
                Tensor d = g;
                for (std::size_t i = 0; i < d.numel(); ++i) {
                    if (na.value[i] <= 0.0) d[i] = 0.0;
                }
                accumulate(n.a, d);
                break;
            }
            case OpKind::Tanh: {
                Tensor d = g;
                for (std::size_t i = 0; i < d.numel(); ++i) d[i] *= 1.0 - n.value[i] * n.value[i];
                accumulate(n.a, d);
                break;
            }
            case OpKind::Exp:
                accumulate(n.a, silo::mul(g, n.value));
                break;
            case OpKind::Div: {
                const Node& nb = nodes_[n.b];
                const Tensor& bv = nb.value;
                if (bv.is_scalar()) {
                    if (na.requires_grad) accumulate(n.a, silo::scale(g, 1.0 / bv[0]));
                    if (nb.requires_grad) {
                        accumulate(n.b, Tensor::scalar(-silo::dot(g, n.value) / bv[0]));
                    }
                } else {
                    if (na.requires_grad) {
                        Tensor d = g;
                        for (std::size_t i = 0; i < d.numel(); ++i) d[i] /= bv[i];
                        accumulate(n.a, d);
                    }
                    if (nb.requires_grad) {
                        Tensor d = g;
                        for (std::size_t i = 0; i < d.numel(); ++i) {
                            d[i] *= -n.value[i] / bv[i];
                        }
                        accumulate(n.b, d);
                    }
                }
                break;
            }
            case OpKind::L1: {
                // subgradient at 0 fixed to 0
                Tensor d(na.value.shape());
                for (std::size_t i = 0; i < d.numel(); ++i) {
                    const double x = na.value[i];
                    d[i] = g[0] * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
                }
                accumulate(n.a, d);
                break;
            }
            case OpKind::L2Norm: {
                // gradient defined as 0 at the origin
                const double norm = n.value[0];
                if (norm > 0.0) accumulate(n.a, silo::scale(na.value, g[0] / norm));
                break;
            }
            case OpKind::Clamp: {
                // subgradient at the boundary fixed to 0
                Tensor d = g;
                for (std::size_t i = 0; i < d.numel(); ++i) {
                    const double x = na.value[i];
                    if (!(x > n.c0 && x < n.c1)) d[i] = 0.0;
                }
                accumulate(n.a, d);
                break;
            }
            case OpKind::Concat: {
                const Node& nb = nodes_[n.b];
                const std::size_t la = na.value.numel();
                if (na.requires_grad) {
                    Tensor da({la});
                    for (std::size_t i = 0; i < la; ++i) da[i] = g[i];
                    accumulate(n.a, da);
                }
                if (nb.requires_grad) {
                    Tensor db({nb.value.numel()});
                    for (std::size_t i = 0; i < db.numel(); ++i) db[i] = g[la + i];
                    accumulate(n.b, db);
                }
                break;
            }
            case OpKind::Index: {
                Tensor d = Tensor::zeros(na.value.shape());
                d[static_cast<std::size_t>(n.c0)] = g[0];
                accumulate(n.a, d);
                break;
            }
            case OpKind::StRound:
                accumulate(n.a, g);  // straight-through
                break;
            case OpKind::Leaf:
                break;
        }
    }
}

}  // namespace silo
