#pragma once

#include <string>
#include <vector>

#include "silo/codec.hpp"
#include "silo/degradation.hpp"
#include "silo/image.hpp"
#include "silo/tensor.hpp"

namespace silo {

// 10*log10(4 / mse), data range 2 for [-1,1] images. Identical inputs are
// reported as the 300 dB cap so aggregates stay finite.
inline constexpr double kPsnrCap = 300.0;
double psnr(const Tensor& x, const Tensor& xhat);
double psnr(const ImageSample& x, const ImageSample& xhat);

// PSNR between A(x) and A(xhat): consistency with the measurement.
double cpsnr(const ImageSample& x, const ImageSample& xhat, const DegradationOp& op);

// Closed-form Frechet distance between Gaussians fitted to codec latents of
// the two sets. A stand-in for learned-feature distances; reports carry the
// "proxy" label. `symmetrized_fallback` is set when the matrix square root
// needed eigenvalue clipping.
struct FrechetResult {
    double distance = 0.0;
    bool symmetrized_fallback = false;
};
FrechetResult frechet_proxy(const LatentCodec& codec, const std::vector<ImageSample>& set_a,
                            const std::vector<ImageSample>& set_b);

struct PerImageEval {
    std::size_t index = 0;
    double psnr = 0.0;
    double cpsnr = 0.0;
    double wall_ms = 0.0;
};

struct EvalReport {
    std::vector<PerImageEval> per_image;
    double mean_psnr = 0.0;
    double std_psnr = 0.0;
    double mean_cpsnr = 0.0;
    double std_cpsnr = 0.0;
    double frechet = 0.0;
    bool frechet_fallback = false;
    double mean_wall_ms = 0.0;

    std::string table(const std::string& label) const;
    std::string records() const;  // line-delimited per-image records
};

// Reconstructions must carry the seed of the test image they were computed
// from (index alignment is checked, shuffles are an error).
EvalReport evaluate_run(const std::vector<ImageSample>& reconstructions,
                        const std::vector<ImageSample>& test, const DegradationOp& op,
                        const LatentCodec& codec, const std::vector<double>& wall_ms = {});

}  // namespace silo
