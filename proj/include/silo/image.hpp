#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "silo/tensor.hpp"

namespace silo {

// Square grayscale image with pixels in [-1, 1], regenerable from its seed.
struct ImageSample {
    std::size_t size = 0;  // pixels per side
    std::vector<double> pixels;
    std::uint64_t seed = 0;

    std::size_t numel() const { return pixels.size(); }
    Tensor as_tensor() const { return Tensor({pixels.size()}, pixels); }
};

ImageSample image_from_tensor(const Tensor& t, std::size_t size, std::uint64_t seed = 0);

struct DatasetSpec {
    std::size_t image_size = 16;
    std::size_t train_count = 2000;
    std::size_t test_count = 200;
    std::uint64_t master_seed = 7001;
};

struct Dataset {
    std::vector<ImageSample> train;
    std::vector<ImageSample> test;
};

// Deterministic function of (spec.master_seed + index): soft Gaussian blobs
// over a tilted background with a faint sinusoidal texture, clamped to
// [-1, 1]. Train indices are 0..train_count-1, test indices follow.
ImageSample render_image(std::size_t image_size, std::uint64_t seed);
Dataset generate(const DatasetSpec& spec);

// PGM (P5, maxval 255). Mapping: byte b <-> b/127.5 - 1.
void write_pgm(const ImageSample& img, const std::string& path);
ImageSample read_pgm(const std::string& path);

}  // namespace silo
