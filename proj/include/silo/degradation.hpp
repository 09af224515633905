#pragma once

#include <cstdint>
#include <string>

#include "silo/image.hpp"
#include "silo/rng.hpp"
#include "silo/tensor.hpp"

namespace silo {

enum class DegradationKind { Identity, GaussianBlur, Downsample, BoxInpaint, DctJpeg };

std::string kind_name(DegradationKind k);
DegradationKind kind_from_name(const std::string& name);

// Pixel-space measurement operator. Linear kinds carry an explicit matrix
// that agrees with the direct implementation to 1e-10; DctJpeg is the one
// nonlinear kind (block DCT + quantization + inverse DCT).
class DegradationOp {
  public:
    struct Params {
        std::size_t blur_size = 7;
        double blur_sigma = 1.0;
        std::size_t sr_factor = 2;
        double box_frac = 0.5;   // box side as a fraction of the image side
        double box_fill = 0.0;
        int jpeg_quality = 10;
    };

    DegradationOp(DegradationKind kind, std::size_t image_size)
        : DegradationOp(kind, image_size, Params()) {}
    DegradationOp(DegradationKind kind, std::size_t image_size, Params params);

    DegradationKind kind() const { return kind_; }
    std::size_t image_size() const { return image_size_; }
    bool linear() const { return kind_ != DegradationKind::DctJpeg; }
    std::size_t input_dim() const { return image_size_ * image_size_; }
    std::size_t output_dim() const { return output_dim_; }
    // side length of the output when rendered as an image
    std::size_t output_size() const { return output_size_; }
    const Params& params() const { return params_; }

    Tensor apply(const Tensor& x) const;
    Tensor apply(const ImageSample& x) const { return apply(x.as_tensor()); }

    // Explicit matrix for linear kinds; throws UnsupportedError for DctJpeg.
    const Tensor& as_matrix() const;

    // Differentiable application. Linear kinds go through the explicit
    // matrix; DctJpeg uses exact DCT/IDCT and a straight-through gradient
    // for the quantizer.
    Var apply_on_tape(Tape& tape, Var x) const;

    // Lifts a measurement back onto the full pixel grid so it can be
    // encoded (pixel replication for downsampling, identity elsewhere).
    Tensor embed_measurement(const Tensor& y) const;

    // true for the pixels replaced by the inpainting box
    const std::vector<bool>& box_mask() const;

  private:
    void build_matrix();
    Tensor apply_jpeg(const Tensor& x) const;

    DegradationKind kind_;
    std::size_t image_size_;
    Params params_;
    std::size_t output_dim_ = 0;
    std::size_t output_size_ = 0;
    Tensor matrix_;            // linear kinds only
    std::vector<bool> mask_;   // BoxInpaint only
    Tensor dct_;               // DctJpeg: full-image block DCT as a matrix
    Tensor idct_;
    Tensor quant_steps_;       // per-coefficient quantization step
};

struct Measurement {
    Tensor y;
    double sigma_y = 0.0;
    DegradationKind kind = DegradationKind::Identity;
    std::uint64_t source_seed = 0;
};

// y = A(x) + v, v ~ N(0, sigma_y^2 I) on the [-1,1] scale.
Measurement measure(const DegradationOp& op, const ImageSample& x, double sigma_y, Rng& rng);

}  // namespace silo
