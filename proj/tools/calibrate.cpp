// Dev-only: prints the measured baselines that the regression tests pin.
#include <cmath>
#include <cstdio>

#include "silo/codec.hpp"
#include "silo/degradation.hpp"
#include "silo/diffusion.hpp"
#include "silo/image.hpp"
#include "silo/metrics.hpp"

using namespace silo;

int main() {
    DatasetSpec spec;
    Dataset ds = generate(spec);
    std::printf("dataset: %zux%zu train=%zu test=%zu\n", spec.image_size, spec.image_size,
                ds.train.size(), ds.test.size());

    double pixel_mean = 0.0, pixel_sq = 0.0;
    std::size_t n = 0;
    for (const auto& img : ds.train) {
        for (double p : img.pixels) {
            pixel_mean += p;
            pixel_sq += p * p;
            ++n;
        }
    }
    pixel_mean /= n;
    std::printf("pixel mean=%.6f std=%.6f\n", pixel_mean,
                std::sqrt(pixel_sq / n - pixel_mean * pixel_mean));

    LatentCodec codec = LatentCodec::fit(ds.train, 32);
    std::printf("scales: ");
    for (std::size_t i = 0; i < 32; ++i) std::printf("%.4f ", codec.scales()[i]);
    std::printf("\n");

    // raw latent stds (after whitening)
    std::vector<double> var(32, 0.0);
    for (const auto& img : ds.train) {
        Tensor z = codec.encode(img);
        for (std::size_t i = 0; i < 32; ++i) var[i] += z[i] * z[i];
    }
    std::printf("latent stds: ");
    for (std::size_t i = 0; i < 32; ++i) std::printf("%.3f ", std::sqrt(var[i] / ds.train.size()));
    std::printf("\n");

    double rec_psnr = 0.0;
    for (const auto& img : ds.test) {
        Tensor rec = codec.decode(codec.encode(img));
        rec_psnr += psnr(img.as_tensor(), rec);
    }
    std::printf("mean reconstruction PSNR=%.3f dB\n", rec_psnr / ds.test.size());

    // clamp hit rate of encode_measure on clean encodings
    std::size_t clamped = 0, total = 0;
    for (const auto& img : ds.test) {
        Tensor z = codec.encode(img);
        for (std::size_t i = 0; i < 32; ++i) {
            if (z[i] < -4.0 || z[i] > 4.0) ++clamped;
            ++total;
        }
    }
    std::printf("clamp hit rate: %zu / %zu\n", clamped, total);

    // encode_measure noise ratio at sigma_y = 0.02
    std::vector<DegradationOp> ops;
    ops.emplace_back(DegradationOp(DegradationKind::Identity, 16));
    ops.emplace_back(DegradationOp(DegradationKind::GaussianBlur, 16));
    ops.emplace_back(DegradationOp(DegradationKind::Downsample, 16));
    ops.emplace_back(DegradationOp(DegradationKind::BoxInpaint, 16));
    ops.emplace_back(DegradationOp(DegradationKind::DctJpeg, 16));
    {
        Rng rng(555);
        double num = 0.0, den = 0.0;
        const auto& op = ops[1];
        for (int i = 0; i < 100; ++i) {
            const auto& x = ds.test[i % ds.test.size()];
            Measurement m = measure(op, x, 0.02, rng);
            Tensor clean = codec.encode(op.embed_measurement(op.apply(x)));
            Tensor noisy = codec.encode_measure(op.embed_measurement(m.y));
            num += l2norm(sub(noisy, clean));
            den += l2norm(clean);
        }
        std::printf("encode_measure rel err (blur, sigma=0.02): %.4f\n", num / den);
    }

    auto rows = encode_decode_report(codec, ds.test, ops, 0.02, 999);
    std::printf("encode-decode report (sigma_y=0.02):\n");
    for (const auto& r : rows) {
        std::printf("  %-9s clean=%.4f noiseless=%.4f noisy=%.4f cross=%.4f\n",
                    kind_name(r.kind).c_str(), r.clean, r.noiseless, r.noisy, r.cross);
    }

    NoiseSchedule sched = NoiseSchedule::make(200, 1e-4, 0.02);
    std::printf("alpha_bar(T) default schedule: %.6f\n", sched.alpha_bar(200));
    return 0;
}
