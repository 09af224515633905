#include "silo/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "silo/error.hpp"
#include "silo/rng.hpp"

namespace silo {

ImageSample image_from_tensor(const Tensor& t, std::size_t size, std::uint64_t seed) {
    if (t.numel() != size * size) {
        throw ShapeError("image_from_tensor: " + t.shape_str() + " is not " +
                         std::to_string(size) + "^2 pixels");
    }
    ImageSample img;
    img.size = size;
    img.pixels = t.data();
    img.seed = seed;
    return img;
}

ImageSample render_image(std::size_t image_size, std::uint64_t seed) {
    Rng rng(seed);
    const auto n = image_size;
    ImageSample img;
    img.size = n;
    img.seed = seed;
    img.pixels.assign(n * n, 0.0);

    // Amplitudes are kept modest so the principal latent scales of the
    // fitted codec land near 1 and the [-4,4] latent clamp sits at >= 3
    // standard deviations.
    const double offset = rng.uniform(-0.10, 0.10);
    const double slope_x = rng.uniform(-0.16, 0.16);
    const double slope_y = rng.uniform(-0.16, 0.16);

    struct Blob {
        double cx, cy, s, amp;
    };
    const int nblobs = rng.uniform_int(2, 4);
    std::vector<Blob> blobs;
    for (int b = 0; b < nblobs; ++b) {
        Blob bl;
        bl.cx = rng.uniform(0.10, 0.90);
        bl.cy = rng.uniform(0.10, 0.90);
        bl.s = rng.uniform(0.08, 0.26);
        bl.amp = rng.uniform(0.15, 0.45) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        blobs.push_back(bl);
    }

    // faint texture term keeps the tail of the PCA spectrum alive
    const double tf_x = rng.uniform(1.0, 4.0);
    const double tf_y = rng.uniform(1.0, 4.0);
    const double tph = rng.uniform(0.0, 6.28318530717958647692);
    const double tamp = rng.uniform(0.01, 0.04);

    for (std::size_t i = 0; i < n; ++i) {
        const double y = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double x = n > 1 ? static_cast<double>(j) / static_cast<double>(n - 1) : 0.0;
            double v = offset + slope_x * (x - 0.5) + slope_y * (y - 0.5);
            for (const auto& b : blobs) {
                const double dx = x - b.cx;
                const double dy = y - b.cy;
                v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.s * b.s));
            }
            v += tamp * std::cos(6.28318530717958647692 * (tf_x * x + tf_y * y) + tph);
            img.pixels[i * n + j] = std::clamp(v, -1.0, 1.0);
        }
    }
    return img;
}

Dataset generate(const DatasetSpec& spec) {
    if (spec.image_size < 8) {
        throw ConfigError("generate: image_size must be >= 8, got " +
                          std::to_string(spec.image_size));
    }
    if (spec.train_count < 1 || spec.test_count < 1) {
        throw ConfigError("generate: train_count and test_count must be >= 1");
    }
    Dataset ds;
    ds.train.reserve(spec.train_count);
    ds.test.reserve(spec.test_count);
    for (std::size_t i = 0; i < spec.train_count; ++i) {
        ds.train.push_back(render_image(spec.image_size, spec.master_seed + i));
    }
    for (std::size_t i = 0; i < spec.test_count; ++i) {
        ds.test.push_back(
            render_image(spec.image_size, spec.master_seed + spec.train_count + i));
    }
    return ds;
}

void write_pgm(const ImageSample& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("write_pgm: cannot open " + path);
    f << "P5\n" << img.size << " " << img.size << "\n255\n";
    for (double v : img.pixels) {
        const double q = std::round((std::clamp(v, -1.0, 1.0) + 1.0) * 127.5);
        const unsigned char b = static_cast<unsigned char>(std::clamp(q, 0.0, 255.0));
        f.put(static_cast<char>(b));
    }
    if (!f) throw ParseError("write_pgm: short write to " + path);
}

namespace {

// next whitespace-delimited token, skipping '#' comment lines
std::string next_token(std::istream& in) {
    std::string tok;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    return tok;
}

std::size_t parse_size(const std::string& tok, const std::string& what, const std::string& path) {
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
        throw ParseError("read_pgm: bad " + what + " '" + tok + "' in " + path);
    }
    return static_cast<std::size_t>(std::stoull(tok));
}

}  // namespace

ImageSample read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("read_pgm: cannot open " + path);
    if (next_token(f) != "P5") throw ParseError("read_pgm: not a P5 file: " + path);
    const std::size_t w = parse_size(next_token(f), "width", path);
    const std::size_t h = parse_size(next_token(f), "height", path);
    const std::size_t maxval = parse_size(next_token(f), "maxval", path);
    if (w != h) throw ParseError("read_pgm: expected square image, got " + std::to_string(w) +
                                 "x" + std::to_string(h) + " in " + path);
    if (maxval != 255) {
        throw ParseError("read_pgm: expected maxval 255, got " + std::to_string(maxval) +
                         " in " + path);
    }
    ImageSample img;
    img.size = w;
    img.pixels.resize(w * h);
    std::vector<char> raw(w * h);
    f.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(f.gcount()) != raw.size()) {
        throw ParseError("read_pgm: truncated pixel data in " + path);
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
        img.pixels[i] = static_cast<double>(static_cast<unsigned char>(raw[i])) / 127.5 - 1.0;
    }
    return img;
}

}  // namespace silo
