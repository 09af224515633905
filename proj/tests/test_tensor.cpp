#include <doctest.h>

#include <cmath>
#include <functional>

#include "silo/rng.hpp"
#include "silo/tensor.hpp"

using namespace silo;

namespace {

// central finite differences of a scalar-valued tape program
Tensor fd_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                   double h = 1e-5) {
    Tensor g(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        Tensor hi = x, lo = x;
        hi[i] += h;
        lo[i] -= h;
        g[i] = (f(hi) - f(lo)) / (2.0 * h);
    }
    return g;
}

double rel_error(const Tensor& a, const Tensor& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

// keeps samples away from the kinks of relu/clamp/l1 so finite differences
// stay valid
Tensor away_from(Rng& rng, std::vector<std::size_t> shape, const std::vector<double>& kinks,
                 double margin = 1e-3) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) {
        do {
            v = rng.uniform(-2.0, 2.0);
        } while ([&] {
            for (double kk : kinks) {
                if (std::abs(v - kk) < margin) return true;
            }
            return false;
        }());
    }
    return t;
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("elementwise forward examples") {
    Tape tp;
    Var a = tp.leaf(Tensor::vector({1, 2}));
    Var b = tp.leaf(Tensor::vector({3, 4}));
    Var c = tp.add(a, b);
    CHECK(tp.value(c)[0] == 4.0);
    CHECK(tp.value(c)[1] == 6.0);

    Var id3 = tp.constant(Tensor::identity(3));
    Var v = tp.leaf(Tensor::vector({0.5, -1.0, 2.0}));
    Var mv = tp.matmul(id3, v);
    CHECK(max_abs_diff(tp.value(mv), tp.value(v)) == 0.0);

    Var n = tp.l2norm(tp.leaf(Tensor::vector({3, 4})));
    CHECK(tp.value(n)[0] == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("shape mismatch errors name the op and both shapes") {
    Tape tp;
    Var a = tp.leaf(Tensor::vector({1, 2}));
    Var b = tp.leaf(Tensor::vector({1, 2, 3}));
    CHECK_THROWS_WITH_AS(tp.add(a, b), "add: shape mismatch ([2] vs [3])", ShapeError);
    Var m = tp.leaf(Tensor::zeros({2, 3}));
    Var v4 = tp.leaf(Tensor::vector({1, 2, 3, 4}));
    CHECK_THROWS_WITH_AS(tp.matmul(m, v4), "matmul: shape mismatch ([2x3] vs [4])",
                         ShapeError);
}

TEST_CASE("backward hand-derived examples") {
    // d/dx sum(x*x) = 2x
    Tape tp;
    Var x = tp.leaf(Tensor::vector({1, 2, 3}));
    tp.backward(tp.sum(tp.mul(x, x)));
    CHECK(max_abs_diff(tp.grad(x), Tensor::vector({2, 4, 6})) < 1e-14);

    // constant root: zero grads everywhere
    Tape tp2;
    Var y = tp2.leaf(Tensor::vector({1, 2}));
    Var c = tp2.constant(Tensor::scalar(7.0));
    tp2.backward(c);
    CHECK(max_abs_diff(tp2.grad(y), Tensor::zeros({2})) == 0.0);

    // d/dx |x|_2 = x / |x|
    Tape tp3;
    Var z = tp3.leaf(Tensor::vector({3, 4}));
    tp3.backward(tp3.l2norm(z));
    CHECK(max_abs_diff(tp3.grad(z), Tensor::vector({0.6, 0.8})) < 1e-14);
}

TEST_CASE("backward requires a scalar root") {
    Tape tp;
    Var x = tp.leaf(Tensor::vector({1, 2}));
    CHECK_THROWS_AS(tp.backward(x), ShapeError);
}

TEST_CASE("root gradient with respect to itself is 1") {
    Tape tp;
    Var x = tp.leaf(Tensor::scalar(3.0));
    Var r = tp.mul(x, x);
    tp.backward(r);
    CHECK(tp.grad(r)[0] == 1.0);
}

TEST_CASE("gradients match central finite differences over 100 seeds") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const std::vector<std::size_t> vs{5};

        struct Case {
            const char* name;
            std::function<Var(Tape&, Var)> build;
            std::vector<double> kinks;
        };
        const Case cases[] = {
            {"add", [&](Tape& t, Var x) { return t.sum(t.add(x, t.constant(Tensor::full(vs, 0.7)))); }, {}},
            {"sub", [&](Tape& t, Var x) { return t.sum(t.sub(x, t.constant(Tensor::full(vs, 0.3)))); }, {}},
            {"mul", [&](Tape& t, Var x) { return t.sum(t.mul(x, x)); }, {}},
            {"scale", [&](Tape& t, Var x) { return t.sum(t.scale(x, -1.7)); }, {}},
            {"mean", [&](Tape& t, Var x) { return t.mean(t.mul(x, x)); }, {}},
            {"relu", [&](Tape& t, Var x) { return t.sum(t.relu(x)); }, {0.0}},
            {"tanh", [&](Tape& t, Var x) { return t.sum(t.tanh(x)); }, {}},
            {"exp", [&](Tape& t, Var x) { return t.sum(t.exp(x)); }, {}},
            {"l1", [&](Tape& t, Var x) { return t.l1(x); }, {0.0}},
            {"l2norm", [&](Tape& t, Var x) { return t.l2norm(x); }, {}},
            {"clamp", [&](Tape& t, Var x) { return t.sum(t.mul(t.clamp(x, -1.0, 1.0), x)); },
             {-1.0, 1.0}},
            {"concat",
             [&](Tape& t, Var x) {
                 Var both = t.concat(x, t.mul(x, x));
                 return t.l2norm(both);
             },
             {}},
            {"index", [&](Tape& t, Var x) { return t.mul(t.index(x, 2), t.index(x, 0)); }, {}},
            {"div",
             [&](Tape& t, Var x) {
                 Var denom = t.add(t.sum(t.mul(x, x)), t.constant(Tensor::scalar(1.0)));
                 return t.sum(t.div(x, denom));
             },
             {}},
            {"smul",
             [&](Tape& t, Var x) { return t.sum(t.smul(t.index(x, 1), t.mul(x, x))); },
             {}},
            {"matmul",
             [&](Tape& t, Var x) {
                 Rng wr(seed + 1000);
                 Var w = t.leaf(Tensor::random_uniform({3, 5}, -1, 1, wr));
                 return t.l2norm(t.matmul(w, x));
             },
             {}},
        };

        for (const auto& c : cases) {
            Tensor x0 = away_from(rng, vs, c.kinks);
            Tape tp;
            Var x = tp.leaf(x0);
            Var root = c.build(tp, x);
            tp.backward(root);
            Tensor tape_grad = tp.grad(x);
            Tensor fd = fd_gradient(
                [&](const Tensor& xin) {
                    Tape t2;
                    Var v = t2.leaf(xin);
                    return t2.value(c.build(t2, v))[0];
                },
                x0);
            INFO(c.name, " seed ", seed);
            CHECK(rel_error(tape_grad, fd) < 1e-5);
        }
    }
}

TEST_CASE("matmul parameter gradients match finite differences") {
    Rng rng(7);
    Tensor w0 = Tensor::random_uniform({3, 4}, -1, 1, rng);
    Tensor x0 = Tensor::random_uniform({4}, -1, 1, rng);
    Tape tp;
    Var w = tp.leaf(w0);
    Var x = tp.constant(x0);
    tp.backward(tp.l2norm(tp.matmul(w, x)));
    Tensor fd = fd_gradient(
        [&](const Tensor& win) {
            Tape t2;
            return t2.value(t2.l2norm(t2.matmul(t2.leaf(win), t2.constant(x0))))[0];
        },
        w0);
    CHECK(rel_error(tp.grad(w), fd) < 1e-6);
}

TEST_CASE("clamp subgradient: 1 strictly inside, 0 outside and at the boundary") {
    Tape tp;
    Var x = tp.leaf(Tensor::vector({-2.0, -1.0, 0.0, 0.999, 1.0, 1.5}));
    tp.backward(tp.sum(tp.clamp(x, -1.0, 1.0)));
    const Tensor g = tp.grad(x);
    CHECK(g[0] == 0.0);  // below
    CHECK(g[1] == 0.0);  // exactly at the lower boundary
    CHECK(g[2] == 1.0);
    CHECK(g[3] == 1.0);
    CHECK(g[4] == 0.0);  // exactly at the upper boundary
    CHECK(g[5] == 0.0);  // above
}

TEST_CASE("l2norm gradient at the origin is the zero tie-break") {
    Tape tp;
    Var x = tp.leaf(Tensor::zeros({3}));
    tp.backward(tp.l2norm(x));
    CHECK(max_abs_diff(tp.grad(x), Tensor::zeros({3})) == 0.0);
}

TEST_CASE("st_round forwards quantized values and passes gradients through") {
    Tape tp;
    Var x = tp.leaf(Tensor::vector({0.26, -1.4}));
    Var q = tp.st_round(x, Tensor::vector({0.5, 1.0}));
    CHECK(tp.value(q)[0] == doctest::Approx(0.5));
    CHECK(tp.value(q)[1] == doctest::Approx(-1.0));
    tp.backward(tp.sum(q));
    CHECK(max_abs_diff(tp.grad(x), Tensor::full({2}, 1.0)) == 0.0);
}

TEST_CASE("gradients accumulate across reuse of a node") {
    // f = sum(x) + l2norm(x): both paths contribute
    Tape tp;
    Var x = tp.leaf(Tensor::vector({3.0, 4.0}));
    tp.backward(tp.add(tp.sum(x), tp.l2norm(x)));
    CHECK(max_abs_diff(tp.grad(x), Tensor::vector({1.6, 1.8})) < 1e-14);
}

}  // TEST_SUITE
