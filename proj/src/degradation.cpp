#include "silo/degradation.hpp"

#include <array>
#include <cmath>

#include "silo/error.hpp"

namespace silo {

std::string kind_name(DegradationKind k) {
    switch (k) {
        case DegradationKind::Identity: return "identity";
        case DegradationKind::GaussianBlur: return "blur";
        case DegradationKind::Downsample: return "sr2";
        case DegradationKind::BoxInpaint: return "inpaint";
        case DegradationKind::DctJpeg: return "jpeg";
    }
    return "?";
}

DegradationKind kind_from_name(const std::string& name) {
    if (name == "identity") return DegradationKind::Identity;
    if (name == "blur") return DegradationKind::GaussianBlur;
    if (name == "sr2") return DegradationKind::Downsample;
    if (name == "inpaint") return DegradationKind::BoxInpaint;
    if (name == "jpeg") return DegradationKind::DctJpeg;
    throw ConfigError("unknown degradation kind '" + name +
                      "' (expected identity|blur|sr2|inpaint|jpeg)");
}

namespace {

// symmetric reflection: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
std::size_t reflect(long i, std::size_t n) {
    const long ln = static_cast<long>(n);
    while (i < 0 || i >= ln) {
        if (i < 0) i = -i - 1;
        if (i >= ln) i = 2 * ln - i - 1;
    }
    return static_cast<std::size_t>(i);
}

std::vector<double> gaussian_kernel(std::size_t size, double sigma) {
    std::vector<double> k(size * size);
    const long r = static_cast<long>(size) / 2;
    double total = 0.0;
    for (long i = -r; i <= r; ++i) {
        for (long j = -r; j <= r; ++j) {
            const double w = std::exp(-(static_cast<double>(i * i + j * j)) / (2.0 * sigma * sigma));
            k[static_cast<std::size_t>((i + r) * static_cast<long>(size) + (j + r))] = w;
            total += w;
        }
    }
    for (auto& w : k) w /= total;
    return k;
}

// orthonormal 8x8 DCT-II basis, rows indexed by frequency
std::array<std::array<double, 8>, 8> dct8_basis() {
    std::array<std::array<double, 8>, 8> m{};
    const double pi = 3.14159265358979323846;
    for (int u = 0; u < 8; ++u) {
        const double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
        for (int x = 0; x < 8; ++x) {
            m[u][x] = a * std::cos((2.0 * x + 1.0) * u * pi / 16.0);
        }
    }
    return m;
}

// baseline luminance quantization table
constexpr int kBaseQuant[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,
    12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,
    14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,
    24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
};

int scaled_quant(int base, int quality) {
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    const int q = (base * scale + 50) / 100;
    return std::clamp(q, 1, 255);
}

}  // namespace

DegradationOp::DegradationOp(DegradationKind kind, std::size_t image_size, Params params)
    : kind_(kind), image_size_(image_size), params_(params) {
    const std::size_t d = image_size_ * image_size_;
    switch (kind_) {
        case DegradationKind::Identity:
        case DegradationKind::GaussianBlur:
            output_dim_ = d;
            output_size_ = image_size_;
            break;
        case DegradationKind::Downsample:
            if (image_size_ % params_.sr_factor != 0) {
                throw ConfigError("Downsample: image size " + std::to_string(image_size_) +
                                  " not divisible by factor " + std::to_string(params_.sr_factor));
            }
            output_size_ = image_size_ / params_.sr_factor;
            output_dim_ = output_size_ * output_size_;
            break;
        case DegradationKind::BoxInpaint: {
            output_dim_ = d;
            output_size_ = image_size_;
            const std::size_t box = static_cast<std::size_t>(
                std::lround(params_.box_frac * static_cast<double>(image_size_)));
            const std::size_t start = (image_size_ - box) / 2;
            mask_.assign(d, false);
            for (std::size_t i = start; i < start + box; ++i) {
                for (std::size_t j = start; j < start + box; ++j) {
                    mask_[i * image_size_ + j] = true;
                }
            }
            break;
        }
        case DegradationKind::DctJpeg: {
            if (image_size_ % 8 != 0) {
                throw ConfigError("DctJpeg: image size must be a multiple of 8");
            }
            output_dim_ = d;
            output_size_ = image_size_;
            const auto basis = dct8_basis();
            dct_ = Tensor::zeros({d, d});
            quant_steps_ = Tensor::zeros({d});
            const std::size_t blocks = image_size_ / 8;
            for (std::size_t bi = 0; bi < blocks; ++bi) {
                for (std::size_t bj = 0; bj < blocks; ++bj) {
                    for (int u = 0; u < 8; ++u) {
                        for (int v = 0; v < 8; ++v) {
                            const std::size_t row =
                                (bi * 8 + u) * image_size_ + (bj * 8 + v);
                            for (int x = 0; x < 8; ++x) {
                                for (int y = 0; y < 8; ++y) {
                                    const std::size_t col =
                                        (bi * 8 + x) * image_size_ + (bj * 8 + y);
                                    dct_.at(row, col) = basis[u][x] * basis[v][y];
                                }
                            }
                            // table is defined for 0..255 pixel units; ours are [-1,1]
                            quant_steps_[row] =
                                scaled_quant(kBaseQuant[u * 8 + v], params_.jpeg_quality) / 127.5;
                        }
                    }
                }
            }
            // orthonormal, so the inverse is the transpose
            idct_ = Tensor::zeros({d, d});
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = 0; j < d; ++j) idct_.at(i, j) = dct_.at(j, i);
            }
            break;
        }
    }
    if (linear()) build_matrix();
}

void DegradationOp::build_matrix() {
    const std::size_t d = input_dim();
    matrix_ = Tensor::zeros({output_dim_, d});
    switch (kind_) {
        case DegradationKind::Identity:
            for (std::size_t i = 0; i < d; ++i) matrix_.at(i, i) = 1.0;
            break;
        case DegradationKind::GaussianBlur: {
            const auto kernel = gaussian_kernel(params_.blur_size, params_.blur_sigma);
            const long r = static_cast<long>(params_.blur_size) / 2;
            for (std::size_t i = 0; i < image_size_; ++i) {
                for (std::size_t j = 0; j < image_size_; ++j) {
                    const std::size_t row = i * image_size_ + j;
                    for (long di = -r; di <= r; ++di) {
                        for (long dj = -r; dj <= r; ++dj) {
                            const std::size_t si = reflect(static_cast<long>(i) + di, image_size_);
                            const std::size_t sj = reflect(static_cast<long>(j) + dj, image_size_);
                            matrix_.at(row, si * image_size_ + sj) +=
                                kernel[static_cast<std::size_t>((di + r) *
                                       static_cast<long>(params_.blur_size) + (dj + r))];
                        }
                    }
                }
            }
            break;
        }
        case DegradationKind::Downsample: {
            const std::size_t f = params_.sr_factor;
            const double w = 1.0 / static_cast<double>(f * f);
            for (std::size_t i = 0; i < output_size_; ++i) {
                for (std::size_t j = 0; j < output_size_; ++j) {
                    const std::size_t row = i * output_size_ + j;
                    for (std::size_t di = 0; di < f; ++di) {
                        for (std::size_t dj = 0; dj < f; ++dj) {
                            matrix_.at(row, (i * f + di) * image_size_ + (j * f + dj)) = w;
                        }
                    }
                }
            }
            break;
        }
        case DegradationKind::BoxInpaint:
            if (params_.box_fill != 0.0) {
                // nonzero fill makes the map affine, not linear
                matrix_ = Tensor();
                return;
            }
            for (std::size_t i = 0; i < d; ++i) {
                if (!mask_[i]) matrix_.at(i, i) = 1.0;
            }
            break;
        case DegradationKind::DctJpeg:
            break;
    }
}

Tensor DegradationOp::apply(const Tensor& x) const {
    if (x.numel() != input_dim()) {
        throw ShapeError("degradation " + kind_name(kind_) + ": input " + x.shape_str() +
                         " does not match image size " + std::to_string(image_size_));
    }
    switch (kind_) {
        case DegradationKind::Identity:
            return x;
        case DegradationKind::GaussianBlur: {
            const auto kernel = gaussian_kernel(params_.blur_size, params_.blur_sigma);
            const long r = static_cast<long>(params_.blur_size) / 2;
            Tensor out({input_dim()});
            for (std::size_t i = 0; i < image_size_; ++i) {
                for (std::size_t j = 0; j < image_size_; ++j) {
                    double acc = 0.0;
                    for (long di = -r; di <= r; ++di) {
                        for (long dj = -r; dj <= r; ++dj) {
                            const std::size_t si = reflect(static_cast<long>(i) + di, image_size_);
                            const std::size_t sj = reflect(static_cast<long>(j) + dj, image_size_);
                            acc += kernel[static_cast<std::size_t>(
                                       (di + r) * static_cast<long>(params_.blur_size) +
                                       (dj + r))] *
                                   x[si * image_size_ + sj];
                        }
                    }
                    out[i * image_size_ + j] = acc;
                }
            }
            return out;
        }
        case DegradationKind::Downsample: {
            const std::size_t f = params_.sr_factor;
            Tensor out({output_dim_});
            for (std::size_t i = 0; i < output_size_; ++i) {
                for (std::size_t j = 0; j < output_size_; ++j) {
                    double acc = 0.0;
                    for (std::size_t di = 0; di < f; ++di) {
                        for (std::size_t dj = 0; dj < f; ++dj) {
                            acc += x[(i * f + di) * image_size_ + (j * f + dj)];
                        }
                    }
                    out[i * output_size_ + j] = acc / static_cast<double>(f * f);
                }
            }
            return out;
        }
        case DegradationKind::BoxInpaint: {
            Tensor out = x;
            for (std::size_t i = 0; i < out.numel(); ++i) {
                if (mask_[i]) out[i] = params_.box_fill;
            }
            return out;
        }
        case DegradationKind::DctJpeg:
            return apply_jpeg(x);
    }
    throw Error("degradation: unreachable");
}

Tensor DegradationOp::apply_jpeg(const Tensor& x) const {
    Tensor coeffs = silo::matmul(dct_, x);
    for (std::size_t i = 0; i < coeffs.numel(); ++i) {
        coeffs[i] = std::round(coeffs[i] / quant_steps_[i]) * quant_steps_[i];
    }
    return silo::matmul(idct_, coeffs);
}

const Tensor& DegradationOp::as_matrix() const {
    if (!linear()) {
        throw UnsupportedError("as_matrix: " + kind_name(kind_) + " is a nonlinear operator");
    }
    if (matrix_.numel() == 0) {
        throw UnsupportedError("as_matrix: inpaint with nonzero fill is affine, not linear");
    }
    return matrix_;
}

Var DegradationOp::apply_on_tape(Tape& tape, Var x) const {
    if (linear()) {
        return tape.matmul(tape.constant(as_matrix()), x);
    }
    Var c = tape.matmul(tape.constant(dct_), x);
    Var q = tape.st_round(c, quant_steps_);
    return tape.matmul(tape.constant(idct_), q);
}

Tensor DegradationOp::embed_measurement(const Tensor& y) const {
    if (y.numel() != output_dim_) {
        throw ShapeError("embed_measurement: " + y.shape_str() + " does not match output dim " +
                         std::to_string(output_dim_));
    }
    if (kind_ != DegradationKind::Downsample) return y;
    const std::size_t f = params_.sr_factor;
    Tensor out({input_dim()});
    for (std::size_t i = 0; i < image_size_; ++i) {
        for (std::size_t j = 0; j < image_size_; ++j) {
            out[i * image_size_ + j] = y[(i / f) * output_size_ + (j / f)];
        }
    }
    return out;
}

const std::vector<bool>& DegradationOp::box_mask() const {
    if (kind_ != DegradationKind::BoxInpaint) {
        throw UnsupportedError("box_mask: only defined for inpaint");
    }
    return mask_;
}

Measurement measure(const DegradationOp& op, const ImageSample& x, double sigma_y, Rng& rng) {
    if (sigma_y < 0.0) throw ConfigError("measure: sigma_y must be >= 0");
    Measurement m;
    m.y = op.apply(x);
    m.sigma_y = sigma_y;
    m.kind = op.kind();
    m.source_seed = x.seed;
    if (sigma_y > 0.0) {
        for (auto& v : m.y.data()) v += sigma_y * rng.normal();
    }
    return m;
}

}  // namespace silo
