#include "silo/codec.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "silo/error.hpp"
#include "silo/metrics.hpp"

namespace silo {

LatentCodec::LatentCodec(Tensor mean, Tensor basis, Tensor scales)
    : mean_(std::move(mean)), basis_(std::move(basis)), scales_(std::move(scales)) {
    finish_init();
}

void LatentCodec::finish_init() {
    if (basis_.ndim() != 2) throw ShapeError("LatentCodec: basis must be 2-D");
    d_ = basis_.shape()[0];
    k_ = basis_.shape()[1];
    if (mean_.numel() != d_ || scales_.numel() != k_) {
        throw ShapeError("LatentCodec: mean/scales dimensions do not match basis " +
                         basis_.shape_str());
    }
    basis_t_scaled_ = Tensor::zeros({k_, d_});
    basis_scaled_ = Tensor::zeros({d_, k_});
    for (std::size_t j = 0; j < k_; ++j) {
        const double s = scales_[j];
        if (!(s > 0.0)) throw NumericError("LatentCodec: nonpositive latent scale");
        for (std::size_t i = 0; i < d_; ++i) {
            basis_t_scaled_.at(j, i) = basis_.at(i, j) / s;
            basis_scaled_.at(i, j) = basis_.at(i, j) * s;
        }
    }
}

LatentCodec LatentCodec::fit(const std::vector<ImageSample>& train, std::size_t latent_dim) {
    if (train.empty()) throw ConfigError("LatentCodec::fit: empty dataset");
    const std::size_t d = train.front().numel();
    const std::size_t n = train.size();
    if (n < latent_dim) {
        throw ConfigError("LatentCodec::fit: need at least k=" + std::to_string(latent_dim) +
                          " images, got " + std::to_string(n));
    }

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (const auto& img : train) {
        mean += Eigen::Map<const Eigen::VectorXd>(img.pixels.data(),
                                                  static_cast<Eigen::Index>(d));
    }
    mean /= static_cast<double>(n);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                                static_cast<Eigen::Index>(d));
    for (const auto& img : train) {
        Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(
                                img.pixels.data(), static_cast<Eigen::Index>(d)) -
                            mean;
        cov.selfadjointView<Eigen::Lower>().rankUpdate(c);
    }
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericError("LatentCodec::fit: eigensolver failed");
    // ascending order from Eigen; we want the top latent_dim
    const Eigen::VectorXd& evals = eig.eigenvalues();
    const Eigen::MatrixXd& evecs = eig.eigenvectors();
    const double lead = std::max(evals(evals.size() - 1), 0.0);
    const double tol = lead * 1e-10;
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < evals.size(); ++i) {
        if (evals(i) > tol) ++rank;
    }
    if (rank < latent_dim) {
        throw NumericError("LatentCodec::fit: training covariance has rank " +
                           std::to_string(rank) + ", need " + std::to_string(latent_dim));
    }

    Tensor mean_t({d});
    for (std::size_t i = 0; i < d; ++i) mean_t[i] = mean(static_cast<Eigen::Index>(i));
    Tensor basis({d, latent_dim});
    Tensor scales({latent_dim});
    for (std::size_t j = 0; j < latent_dim; ++j) {
        const Eigen::Index src = evals.size() - 1 - static_cast<Eigen::Index>(j);
        Eigen::VectorXd v = evecs.col(src);
        // pin the sign so fits are reproducible across solvers
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v(imax) < 0.0) v = -v;
        for (std::size_t i = 0; i < d; ++i) basis.at(i, j) = v(static_cast<Eigen::Index>(i));
        scales[j] = std::min(1.0, std::sqrt(std::max(evals(src), 0.0)));
    }
    return LatentCodec(std::move(mean_t), std::move(basis), std::move(scales));
}

Tensor LatentCodec::encode(const Tensor& x) const {
    if (x.numel() != d_) {
        throw ShapeError("encode: input " + x.shape_str() + " does not match pixel dim " +
                         std::to_string(d_));
    }
    n_encode_.fetch_add(1, std::memory_order_relaxed);
    return silo::matmul(basis_t_scaled_, silo::sub(x, mean_));
}

Tensor LatentCodec::decode(const Tensor& z) const {
    if (z.numel() != k_) {
        throw ShapeError("decode: input " + z.shape_str() + " does not match latent dim " +
                         std::to_string(k_));
    }
    n_decode_.fetch_add(1, std::memory_order_relaxed);
    return silo::add(mean_, silo::matmul(basis_scaled_, z));
}

Tensor LatentCodec::encode_measure(const Tensor& y) const {
    return silo::clamp(encode(y), kMeasureClampLo, kMeasureClampHi);
}

Var LatentCodec::encode_on_tape(Tape& tape, Var x) const {
    n_tape_encode_.fetch_add(1, std::memory_order_relaxed);
    Var centered = tape.sub(x, tape.constant(mean_));
    return tape.matmul(tape.constant(basis_t_scaled_, NodeTag::Encoder), centered);
}

Var LatentCodec::decode_on_tape(Tape& tape, Var z) const {
    n_tape_decode_.fetch_add(1, std::memory_order_relaxed);
    Var proj = tape.matmul(tape.constant(basis_scaled_, NodeTag::Decoder), z);
    return tape.add(tape.constant(mean_), proj);
}

double LatentCodec::basis_spectral_norm(int iters) const {
    // power iteration on B^T B
    Tensor gram({k_, k_});
    for (std::size_t a = 0; a < k_; ++a) {
        for (std::size_t b = 0; b < k_; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < d_; ++i) acc += basis_.at(i, a) * basis_.at(i, b);
            gram.at(a, b) = acc;
        }
    }
    Tensor v = Tensor::full({k_}, 1.0 / std::sqrt(static_cast<double>(k_)));
    double lambda = 0.0;
    for (int it = 0; it < iters; ++it) {
        Tensor w = silo::matmul(gram, v);
        const double norm = silo::l2norm(w);
        if (norm == 0.0) return 0.0;
        v = silo::scale(w, 1.0 / norm);
        lambda = norm;
    }
    return std::sqrt(lambda);
}

LatentCodec::Counts LatentCodec::counts() const {
    return {n_encode_.load(), n_decode_.load(), n_tape_encode_.load(), n_tape_decode_.load()};
}

void LatentCodec::reset_counts() const {
    n_encode_ = 0;
    n_decode_ = 0;
    n_tape_encode_ = 0;
    n_tape_decode_ = 0;
}

std::vector<EncodeDecodeRow> encode_decode_report(const LatentCodec& codec,
                                                  const std::vector<ImageSample>& test,
                                                  const std::vector<DegradationOp>& ops,
                                                  double sigma_y, std::uint64_t seed) {
    if (ops.empty()) throw ConfigError("encode_decode_report: need at least one degradation");
    std::vector<EncodeDecodeRow> rows;
    auto roundtrip = [&](const Tensor& v) { return codec.decode(codec.encode(v)); };
    for (const auto& op : ops) {
        EncodeDecodeRow row;
        row.kind = op.kind();
        Rng rng(seed + static_cast<std::uint64_t>(op.kind()));
        for (const auto& x : test) {
            const Tensor xt = x.as_tensor();
            const Tensor y_nl = op.embed_measurement(op.apply(xt));
            Tensor y = y_nl;
            for (auto& v : y.data()) v += sigma_y * rng.normal();
            const Tensor fy = roundtrip(y);
            row.clean += psnr(xt, roundtrip(xt));
            row.noiseless += psnr(y_nl, roundtrip(y_nl));
            row.noisy += psnr(y, fy);
            row.cross += psnr(y_nl, fy);
        }
        const double inv = 1.0 / static_cast<double>(test.size());
        row.clean *= inv;
        row.noiseless *= inv;
        row.noisy *= inv;
        row.cross *= inv;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace silo
