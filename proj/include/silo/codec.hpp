#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include "silo/degradation.hpp"
#include "silo/image.hpp"
#include "silo/tensor.hpp"

namespace silo {

// Linear encoder/decoder pair over centered pixels:
//   encode(x) = S^-1 B^T (x - mean),   decode(z) = mean + B S z
// with B a d x k matrix of orthonormal principal directions and S a diagonal
// of latent scales capped at 1. The cap keeps decode non-expansive (its
// Lipschitz constant never exceeds the basis' top singular value, which is
// exactly 1), while coordinates whose raw scale is below 1 come out fully
// whitened, so the [-4,4] measurement clamp sits at several standard
// deviations for every coordinate.
class LatentCodec {
  public:
    LatentCodec() = default;
    // direct construction; fit() is the checked path
    LatentCodec(Tensor mean, Tensor basis, Tensor scales);
    // copies start with fresh call counters
    LatentCodec(const LatentCodec& other) { *this = other; }
    LatentCodec& operator=(const LatentCodec& other) {
        if (this != &other) {
            d_ = other.d_;
            k_ = other.k_;
            mean_ = other.mean_;
            basis_ = other.basis_;
            scales_ = other.scales_;
            basis_t_scaled_ = other.basis_t_scaled_;
            basis_scaled_ = other.basis_scaled_;
            reset_counts();
        }
        return *this;
    }

    // PCA on the training images. Throws when the centered data has
    // effective rank below k.
    static LatentCodec fit(const std::vector<ImageSample>& train, std::size_t latent_dim);

    std::size_t latent_dim() const { return k_; }
    std::size_t pixel_dim() const { return d_; }
    const Tensor& mean() const { return mean_; }
    const Tensor& basis() const { return basis_; }
    const Tensor& scales() const { return scales_; }

    Tensor encode(const Tensor& x) const;
    Tensor encode(const ImageSample& x) const { return encode(x.as_tensor()); }
    Tensor decode(const Tensor& z) const;

    // clamp(encode(y), -4, 4), the measurement embedding
    Tensor encode_measure(const Tensor& y) const;

    // Tagged, differentiable versions for solvers that keep the
    // autoencoder inside their gradient graph.
    Var encode_on_tape(Tape& tape, Var x) const;
    Var decode_on_tape(Tape& tape, Var z) const;

    // top singular value of the basis by power iteration
    double basis_spectral_norm(int iters = 200) const;

    static constexpr double kMeasureClampLo = -4.0;
    static constexpr double kMeasureClampHi = 4.0;

    // Call counters; totals across all threads. Solvers snapshot them to
    // assert how often a reconstruction touched the autoencoder.
    struct Counts {
        std::uint64_t encode = 0;
        std::uint64_t decode = 0;
        std::uint64_t tape_encode = 0;
        std::uint64_t tape_decode = 0;
    };
    Counts counts() const;
    void reset_counts() const;

  private:
    void finish_init();

    std::size_t d_ = 0;
    std::size_t k_ = 0;
    Tensor mean_;    // [d]
    Tensor basis_;   // [d, k]
    Tensor scales_;  // [k], entries in (0, 1]
    Tensor basis_t_scaled_;   // S^-1 B^T, the encode matrix [k, d]
    Tensor basis_scaled_;     // B S, the decode matrix [d, k]

    mutable std::atomic<std::uint64_t> n_encode_{0};
    mutable std::atomic<std::uint64_t> n_decode_{0};
    mutable std::atomic<std::uint64_t> n_tape_encode_{0};
    mutable std::atomic<std::uint64_t> n_tape_decode_{0};
};

// PSNR table of x vs D(E(x)) pairs across degradations, matching the
// four-column layout: (x, f(x)), (y_nl, f(y_nl)), (y, f(y)), (y_nl, f(y)).
struct EncodeDecodeRow {
    DegradationKind kind;
    double clean = 0.0;        // PSNR(x, f(x))
    double noiseless = 0.0;    // PSNR(y_nl, f(y_nl))
    double noisy = 0.0;        // PSNR(y, f(y))
    double cross = 0.0;        // PSNR(y_nl, f(y))
};

std::vector<EncodeDecodeRow> encode_decode_report(const LatentCodec& codec,
                                                  const std::vector<ImageSample>& test,
                                                  const std::vector<DegradationOp>& ops,
                                                  double sigma_y, std::uint64_t seed);

}  // namespace silo
