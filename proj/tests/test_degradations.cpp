#include <doctest.h>

#include <cmath>

#include "silo/degradation.hpp"
#include "silo/error.hpp"
#include "silo/image.hpp"

using namespace silo;

namespace {
constexpr std::size_t kSize = 16;
}

TEST_SUITE("degradations") {

TEST_CASE("identity returns the input") {
    DegradationOp op(DegradationKind::Identity, kSize);
    ImageSample x = render_image(kSize, 3);
    CHECK(max_abs_diff(op.apply(x), x.as_tensor()) == 0.0);
}

TEST_CASE("downsampling a constant image keeps the constant") {
    DegradationOp op(DegradationKind::Downsample, kSize);
    Tensor x = Tensor::full({kSize * kSize}, 0.37);
    Tensor y = op.apply(x);
    REQUIRE(y.numel() == 64);
    for (double v : y.data()) CHECK(v == doctest::Approx(0.37).epsilon(1e-15));
}

TEST_CASE("inpainting zeroes exactly the center box") {
    DegradationOp op(DegradationKind::BoxInpaint, kSize);
    ImageSample img = render_image(kSize, 9);
    // keep the test honest: no zero pixels outside the box
    for (auto& p : img.pixels) {
        if (p == 0.0) p = 0.1;
    }
    Tensor y = op.apply(img);
    std::size_t zeroed = 0;
    std::size_t changed = 0;
    for (std::size_t i = 0; i < y.numel(); ++i) {
        if (y[i] == 0.0) ++zeroed;
        if (y[i] != img.pixels[i]) ++changed;
    }
    CHECK(zeroed == 64);  // (16/2)^2
    CHECK(changed == 64);
}

TEST_CASE("blurring a constant image is exact under reflection padding") {
    DegradationOp op(DegradationKind::GaussianBlur, kSize);
    Tensor x = Tensor::full({kSize * kSize}, -0.61);
    Tensor y = op.apply(x);
    for (double v : y.data()) CHECK(v == doctest::Approx(-0.61).epsilon(1e-12));
}

TEST_CASE("blur matrix rows sum to one") {
    DegradationOp op(DegradationKind::GaussianBlur, kSize);
    const Tensor& m = op.as_matrix();
    for (std::size_t i = 0; i < m.shape()[0]; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < m.shape()[1]; ++j) row += m.at(i, j);
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("every linear op agrees with its explicit matrix on 100 random images") {
    const DegradationKind kinds[] = {DegradationKind::Identity, DegradationKind::GaussianBlur,
                                     DegradationKind::Downsample, DegradationKind::BoxInpaint};
    for (auto kind : kinds) {
        DegradationOp op(kind, kSize);
        const Tensor& m = op.as_matrix();
        for (std::uint64_t s = 0; s < 100; ++s) {
            ImageSample img = render_image(kSize, 1000 + s);
            const Tensor direct = op.apply(img);
            const Tensor via_matrix = matmul(m, img.as_tensor());
            INFO(kind_name(kind), " seed ", s);
            CHECK(max_abs_diff(direct, via_matrix) < 1e-10);
        }
    }
}

TEST_CASE("inpaint matrix is an idempotent 0/1 diagonal selection") {
    DegradationOp op(DegradationKind::BoxInpaint, kSize);
    const Tensor& m = op.as_matrix();
    for (std::size_t i = 0; i < m.shape()[0]; ++i) {
        for (std::size_t j = 0; j < m.shape()[1]; ++j) {
            if (i == j) {
                CHECK((m.at(i, j) == 0.0 || m.at(i, j) == 1.0));
            } else {
                CHECK(m.at(i, j) == 0.0);
            }
        }
    }
    // M^T M = M for a selection
    const Tensor mtm = matmul(m, m);
    CHECK(max_abs_diff(mtm, m) == 0.0);
}

TEST_CASE("jpeg is nonlinear: no explicit matrix") {
    DegradationOp op(DegradationKind::DctJpeg, kSize);
    CHECK(!op.linear());
    CHECK_THROWS_WITH_AS(op.as_matrix(), "as_matrix: jpeg is a nonlinear operator",
                         UnsupportedError);
}

TEST_CASE("jpeg is idempotent up to quantization stability") {
    DegradationOp op(DegradationKind::DctJpeg, kSize);
    for (std::uint64_t s = 0; s < 10; ++s) {
        ImageSample img = render_image(kSize, 2000 + s);
        const Tensor once = op.apply(img);
        const Tensor twice = op.apply(once);
        CHECK(max_abs_diff(once, twice) < 1e-9);
    }
}

TEST_CASE("jpeg actually quantizes") {
    DegradationOp op(DegradationKind::DctJpeg, kSize);
    ImageSample img = render_image(kSize, 77);
    CHECK(max_abs_diff(op.apply(img), img.as_tensor()) > 1e-3);
}

TEST_CASE("measure with sigma 0 is exact") {
    DegradationOp op(DegradationKind::GaussianBlur, kSize);
    ImageSample x = render_image(kSize, 5);
    Rng rng(1);
    Measurement m = measure(op, x, 0.0, rng);
    CHECK(max_abs_diff(m.y, op.apply(x)) == 0.0);
    CHECK(m.kind == DegradationKind::GaussianBlur);
    CHECK(m.source_seed == x.seed);
}

TEST_CASE("measurement noise has the configured deviation") {
    // 1e5 pixels of pure noise via the identity op
    DegradationOp op(DegradationKind::Identity, kSize);
    Rng rng(123);
    double sq = 0.0;
    std::size_t n = 0;
    for (int rep = 0; rep < 400; ++rep) {
        ImageSample x = render_image(kSize, 3000 + rep);
        Measurement m = measure(op, x, 0.02, rng);
        const Tensor ax = op.apply(x);
        for (std::size_t i = 0; i < ax.numel(); ++i) {
            const double d = m.y[i] - ax[i];
            sq += d * d;
            ++n;
        }
    }
    const double std = std::sqrt(sq / static_cast<double>(n));
    CHECK(n >= 100000);
    CHECK(std == doctest::Approx(0.02).epsilon(0.01));
}

TEST_CASE("high-noise convention doubles the nominal level") {
    DegradationOp op(DegradationKind::Identity, kSize);
    Rng rng(99);
    ImageSample x = render_image(kSize, 4);
    Measurement m = measure(op, x, 0.06, rng);
    CHECK(m.sigma_y == 0.06);
}

TEST_CASE("embed_measurement replicates downsampled pixels") {
    DegradationOp op(DegradationKind::Downsample, kSize);
    ImageSample x = render_image(kSize, 8);
    Tensor y = op.apply(x);
    Tensor up = op.embed_measurement(y);
    REQUIRE(up.numel() == kSize * kSize);
    for (std::size_t i = 0; i < kSize; ++i) {
        for (std::size_t j = 0; j < kSize; ++j) {
            CHECK(up[i * kSize + j] == y[(i / 2) * 8 + (j / 2)]);
        }
    }
    // identity for same-size ops
    DegradationOp blur(DegradationKind::GaussianBlur, kSize);
    Tensor yb = blur.apply(x);
    CHECK(max_abs_diff(blur.embed_measurement(yb), yb) == 0.0);
}

TEST_CASE("size mismatch is rejected") {
    DegradationOp op(DegradationKind::GaussianBlur, kSize);
    CHECK_THROWS_AS(op.apply(Tensor::zeros({100})), ShapeError);
}

TEST_CASE("taped application matches the numeric path") {
    const DegradationKind kinds[] = {DegradationKind::GaussianBlur, DegradationKind::Downsample,
                                     DegradationKind::BoxInpaint, DegradationKind::DctJpeg};
    for (auto kind : kinds) {
        DegradationOp op(kind, kSize);
        ImageSample img = render_image(kSize, 321);
        Tape tp;
        Var x = tp.leaf(img.as_tensor());
        Var y = op.apply_on_tape(tp, x);
        INFO(kind_name(kind));
        CHECK(max_abs_diff(tp.value(y), op.apply(img)) < 1e-12);
    }
}

}  // TEST_SUITE
