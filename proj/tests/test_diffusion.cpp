#include <doctest.h>

#include <cmath>

#include "silo/denoiser.hpp"
#include "silo/diffusion.hpp"
#include "silo/error.hpp"
#include "silo/rng.hpp"

using namespace silo;

namespace {

Gmm two_component_2d() {
    Tensor m1 = Tensor::vector({1.2, -0.4});
    Tensor m2 = Tensor::vector({-0.9, 0.8});
    Tensor c1({2, 2}, {0.5, 0.2, 0.2, 0.4});
    Tensor c2({2, 2}, {0.3, -0.1, -0.1, 0.6});
    return Gmm::from({0.6, 0.4}, {m1, m2}, {c1, c2});
}

// importance-weighted Monte-Carlo posterior mean: sample z0 from the prior,
// weight by N(z_t; sqrt(abar) z0, (1-abar) I)
Tensor mc_posterior_mean(const Gmm& gmm, const Tensor& z_t, double abar, std::size_t samples,
                         Rng& rng) {
    const std::size_t k = gmm.dim();
    Tensor acc = Tensor::zeros({k});
    double total = 0.0;
    const double s = std::sqrt(abar);
    const double var = 1.0 - abar;
    for (std::size_t i = 0; i < samples; ++i) {
        Tensor z0 = gmm.sample(rng);
        double q = 0.0;
        for (std::size_t d = 0; d < k; ++d) {
            const double diff = z_t[d] - s * z0[d];
            q += diff * diff;
        }
        const double w = std::exp(-0.5 * q / var);
        acc = axpy(acc, w, z0);
        total += w;
    }
    return scale(acc, 1.0 / total);
}

}  // namespace

TEST_SUITE("diffusion-core") {

TEST_CASE("schedule hand product: T=2, beta=0.1") {
    NoiseSchedule s = NoiseSchedule::make(2, 0.1, 0.1);
    CHECK(s.alpha_bar(0) == 1.0);
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.alpha_bar(2) == doctest::Approx(0.81).epsilon(1e-15));
    CHECK(s.beta(1) == 0.1);
    CHECK(s.alpha(2) == doctest::Approx(0.9));
}

TEST_CASE("schedule invariants: alpha_bar strictly decreasing from 1") {
    NoiseSchedule s = NoiseSchedule::make(200, 1e-4, 0.02);
    for (std::size_t t = 1; t <= 200; ++t) {
        CHECK(s.beta(t) > 0.0);
        CHECK(s.beta(t) < 1.0);
        CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    }
    CHECK(s.alpha_bar(200) < s.alpha_bar(1));
}

TEST_CASE("vanishing beta limit: alpha_bar(T) -> 1") {
    NoiseSchedule s = NoiseSchedule::make(100, 1e-12, 1e-12);
    CHECK(s.alpha_bar(100) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("default schedule regression: alpha_bar(T) = 0.1322") {
    // direct evaluation of the running product, frozen
    NoiseSchedule s = NoiseSchedule::make(200, 1e-4, 0.02);
    CHECK(s.alpha_bar(200) == doctest::Approx(0.132183).epsilon(2e-4));
}

TEST_CASE("schedule preconditions") {
    CHECK_THROWS_AS(NoiseSchedule::make(10, 0.0, 0.1), ConfigError);
    CHECK_THROWS_AS(NoiseSchedule::make(10, 0.2, 0.1), ConfigError);
    CHECK_THROWS_AS(NoiseSchedule::make(10, 0.1, 1.0), ConfigError);
    NoiseSchedule s = NoiseSchedule::make(10, 1e-4, 0.02);
    CHECK_THROWS_AS(s.beta(0), ConfigError);
    CHECK_THROWS_AS(s.beta(11), ConfigError);
    CHECK_THROWS_AS(s.alpha_bar(11), ConfigError);
}

TEST_CASE("forward noise at t=0 is the identity with no rng draw") {
    NoiseSchedule s = NoiseSchedule::make(10, 1e-4, 0.02);
    Rng rng(1);
    const std::uint64_t before = rng.next_u64();
    Rng rng2(1);
    Tensor z0 = Tensor::vector({0.3, -0.7});
    Tensor z = forward_noise(z0, 0, s, rng2);
    CHECK(max_abs_diff(z, z0) == 0.0);
    CHECK(rng2.next_u64() == before);
}

TEST_CASE("forward noise matches its first two moments at 1e5 draws") {
    NoiseSchedule s = NoiseSchedule::make(200, 1e-4, 0.02);
    const std::size_t t = 100;
    const double abar = s.alpha_bar(t);
    Tensor z0 = Tensor::vector({1.0, -2.0, 0.5, 0.0});
    Rng rng(78);
    const std::size_t n = 100000;
    Tensor mean = Tensor::zeros({4});
    Tensor sq = Tensor::zeros({4});
    for (std::size_t i = 0; i < n; ++i) {
        Tensor z = forward_noise(z0, t, s, rng);
        for (std::size_t d = 0; d < 4; ++d) {
            mean[d] += z[d];
            sq[d] += z[d] * z[d];
        }
    }
    const double se = std::sqrt((1.0 - abar) / static_cast<double>(n));
    for (std::size_t d = 0; d < 4; ++d) {
        mean[d] /= static_cast<double>(n);
        const double var = sq[d] / static_cast<double>(n) - mean[d] * mean[d];
        CHECK(std::abs(mean[d] - std::sqrt(abar) * z0[d]) < 3.0 * se);
        CHECK(var == doctest::Approx(1.0 - abar).epsilon(0.03));
    }
}

TEST_CASE("forward noise rejects t beyond the schedule") {
    NoiseSchedule s = NoiseSchedule::make(10, 1e-4, 0.02);
    Rng rng(1);
    CHECK_THROWS_AS(forward_noise(Tensor::vector({0.0}), 11, s, rng), ConfigError);
}

TEST_CASE("gmm posterior mean: single component, abar = 1 returns the input") {
    Tensor mu = Tensor::vector({0.4, -0.2});
    Gmm g = Gmm::from({1.0}, {mu}, {Tensor::identity(2)});
    Tensor z = Tensor::vector({2.0, 3.0});
    CHECK(max_abs_diff(g.posterior_mean(z, 1.0), z) < 1e-12);
}

TEST_CASE("gmm posterior mean: standard Gaussian gives sqrt(abar) z") {
    // closed-form conditioning: with z0 ~ N(0, I), E[z0|z_t] =
    // sqrt(abar) z_t / (abar + 1 - abar) = sqrt(abar) z_t
    Gmm g = Gmm::from({1.0}, {Tensor::zeros({3})}, {Tensor::identity(3)});
    Tensor z = Tensor::vector({1.0, -2.0, 0.5});
    for (double abar : {0.1, 0.5, 0.9}) {
        CHECK(max_abs_diff(g.posterior_mean(z, abar), scale(z, std::sqrt(abar))) < 1e-12);
    }
}

TEST_CASE("gmm posterior mean matches importance-sampled Monte-Carlo in 2-D") {
    Gmm g = two_component_2d();
    Rng rng(42);
    const double abar = 0.55;
    for (int i = 0; i < 3; ++i) {
        Tensor z_t = Tensor::vector({rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)});
        Tensor exact = g.posterior_mean(z_t, abar);
        Tensor mc = mc_posterior_mean(g, z_t, abar, 200000, rng);
        CHECK(max_abs_diff(exact, mc) < 2e-2);
    }
}

TEST_CASE("tweedie identity ties the score to the posterior mean exactly") {
    Gmm g = two_component_2d();
    Rng rng(4);
    for (double abar : {0.2, 0.5, 0.86}) {
        for (int i = 0; i < 10; ++i) {
            Tensor z = Tensor::vector({rng.uniform(-2, 2), rng.uniform(-2, 2)});
            Tensor zhat = g.posterior_mean(z, abar);
            // score = (-z + sqrt(abar) zhat) / (1 - abar)
            Tensor implied = scale(sub(scale(zhat, std::sqrt(abar)), z), 1.0 / (1.0 - abar));
            Tensor s = g.score(z, abar);
            CHECK(l2norm(sub(implied, s)) / std::max(l2norm(s), 1e-12) < 1e-6);
        }
    }
}

TEST_CASE("analytic score matches finite differences of the log density") {
    Gmm g = two_component_2d();
    Rng rng(8);
    const double h = 1e-6;
    for (double abar : {0.3, 0.7}) {
        for (int i = 0; i < 5; ++i) {
            Tensor z = Tensor::vector({rng.uniform(-2, 2), rng.uniform(-2, 2)});
            Tensor s = g.score(z, abar);
            for (std::size_t d = 0; d < 2; ++d) {
                Tensor hi = z, lo = z;
                hi[d] += h;
                lo[d] -= h;
                const double fd = (g.log_density(hi, abar) - g.log_density(lo, abar)) / (2 * h);
                CHECK(s[d] == doctest::Approx(fd).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("taped gmm posterior mean equals the numeric one") {
    Gmm g = two_component_2d();
    Rng rng(12);
    for (double abar : {0.25, 0.75}) {
        Tensor z = Tensor::vector({rng.uniform(-2, 2), rng.uniform(-2, 2)});
        Tape tp;
        Var zv = tp.leaf(z);
        Var out = g.posterior_mean_on_tape(tp, zv, abar);
        CHECK(max_abs_diff(tp.value(out), g.posterior_mean(z, abar)) < 1e-12);
    }
}

TEST_CASE("ancestral coefficients hand evaluation at T=2, t=2") {
    NoiseSchedule s = NoiseSchedule::make(2, 0.1, 0.1);
    AncestralCoeffs c = ancestral_coeffs(2, s);
    CHECK(c.z_t == doctest::Approx(std::sqrt(0.9) * 0.1 / 0.19).epsilon(1e-14));
    CHECK(c.z_hat == doctest::Approx(std::sqrt(0.9) * 0.1 / 0.19).epsilon(1e-14));
    CHECK(c.noise == doctest::Approx(std::sqrt(0.1 * 0.1 / 0.19)).epsilon(1e-14));
}

TEST_CASE("the t=1 step is deterministic") {
    NoiseSchedule s = NoiseSchedule::make(5, 1e-3, 0.02);
    AncestralCoeffs c = ancestral_coeffs(1, s);
    CHECK(c.noise == 0.0);
    Rng r1(1), r2(999);
    Tensor z = Tensor::vector({0.5, -0.5});
    Tensor zh = Tensor::vector({0.1, 0.2});
    CHECK(max_abs_diff(ancestral_step(z, zh, 1, s, r1), ancestral_step(z, zh, 1, s, r2)) == 0.0);
}

TEST_CASE("ancestral sampling with the exact denoiser reproduces prior moments") {
    // light version; the full 1e4-sample run lives in the acceptance suite
    Gmm g = two_component_2d();
    NoiseSchedule s = NoiseSchedule::make(200, 1e-4, 0.05);
    DenoiserModel den = DenoiserModel::from_gmm(g);
    Rng rng(31);
    const std::size_t n = 2000;
    Tensor mean = Tensor::zeros({2});
    Tensor cov = Tensor::zeros({2, 2});
    std::vector<Tensor> samples;
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Tensor z({2});
        for (auto& v : z.data()) v = rng.normal();
        for (std::size_t t = s.steps(); t >= 1; --t) {
            z = ancestral_step(z, den.denoise(z, t, s), t, s, rng);
        }
        mean = add(mean, z);
        samples.push_back(z);
    }
    mean = scale(mean, 1.0 / static_cast<double>(n));
    for (const auto& z : samples) {
        for (std::size_t a = 0; a < 2; ++a) {
            for (std::size_t b = 0; b < 2; ++b) {
                cov.at(a, b) += (z[a] - mean[a]) * (z[b] - mean[b]);
            }
        }
    }
    cov = scale(cov, 1.0 / static_cast<double>(n));
    const Tensor pm = g.mixture_mean();
    const Tensor pc = g.mixture_cov();
    for (std::size_t d = 0; d < 2; ++d) {
        const double se = std::sqrt(pc.at(d, d) / static_cast<double>(n));
        CHECK(std::abs(mean[d] - pm[d]) < 4.0 * se);
    }
    double num = 0.0, den2 = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        num += (cov[i] - pc[i]) * (cov[i] - pc[i]);
        den2 += pc[i] * pc[i];
    }
    CHECK(std::sqrt(num / den2) < 0.10);
}

TEST_CASE("identical seeds give identical trajectories") {
    Gmm g = two_component_2d();
    NoiseSchedule s = NoiseSchedule::make(50, 1e-4, 0.02);
    DenoiserModel den = DenoiserModel::from_gmm(g);
    auto run = [&](std::uint64_t seed) {
        Rng rng(seed);
        Tensor z({2});
        for (auto& v : z.data()) v = rng.normal();
        for (std::size_t t = s.steps(); t >= 1; --t) {
            z = ancestral_step(z, den.denoise(z, t, s), t, s, rng);
        }
        return z;
    };
    CHECK(max_abs_diff(run(7), run(7)) == 0.0);
    CHECK(max_abs_diff(run(7), run(8)) > 0.0);
}

TEST_CASE("denoise rejects non-finite latents") {
    Gmm g = two_component_2d();
    DenoiserModel den = DenoiserModel::from_gmm(g);
    NoiseSchedule s = NoiseSchedule::make(10, 1e-4, 0.02);
    Tensor bad = Tensor::vector({std::nan(""), 0.0});
    CHECK_THROWS_AS(den.denoise(bad, 5, s), NumericError);
}

TEST_CASE("untrained epsilon-predictor has loss near the latent dimension") {
    // E|eps - eps_theta|^2 with a near-zero network is E|eps|^2 = k
    NoiseSchedule s = NoiseSchedule::make(50, 1e-4, 0.02);
    Rng rng(3);
    std::vector<Tensor> latents;
    for (int i = 0; i < 64; ++i) latents.push_back(Tensor::random_normal({8}, 0.0, 1.0, rng));
    DenoiserTrainConfig cfg;
    cfg.steps = 60;
    cfg.batch = 64;
    cfg.hidden = 32;
    TrainStats stats;
    train_mlp_denoiser(latents, s, cfg, &stats);
    CHECK(stats.initial_loss == doctest::Approx(8.0).epsilon(0.25));
}

TEST_CASE("one-point dataset overfits to a small loss") {
    NoiseSchedule s = NoiseSchedule::make(50, 1e-4, 0.02);
    Rng rng(4);
    std::vector<Tensor> latents{Tensor::random_normal({4}, 0.0, 1.0, rng)};
    DenoiserTrainConfig cfg;
    cfg.steps = 3000;
    cfg.batch = 16;
    cfg.hidden = 64;
    cfg.lr = 3e-3;
    TrainStats stats;
    train_mlp_denoiser(latents, s, cfg, &stats);
    // measured 0.03 once on this seed; frozen with headroom
    CHECK(stats.final_loss < 0.15);
    CHECK(stats.final_loss < 0.2 * stats.initial_loss);
}

TEST_CASE("trained denoiser is within 2x of the exact mixture denoiser at T/2") {
    Gmm g = two_component_2d();
    NoiseSchedule s = NoiseSchedule::make(100, 1e-4, 0.02);
    Rng rng(9);
    std::vector<Tensor> latents;
    for (int i = 0; i < 2000; ++i) latents.push_back(g.sample(rng));
    DenoiserTrainConfig cfg;
    cfg.steps = 4000;
    cfg.batch = 16;
    cfg.hidden = 64;
    cfg.seed = 21;
    DenoiserModel mlp = train_mlp_denoiser(latents, s, cfg);
    DenoiserModel exact = DenoiserModel::from_gmm(g);

    const std::size_t t = 50;
    Rng eval(100);
    double err_mlp = 0.0, err_gmm = 0.0;
    for (int i = 0; i < 500; ++i) {
        Tensor z0 = g.sample(eval);
        Tensor z_t = forward_noise(z0, t, s, eval);
        Tensor a = mlp.denoise(z_t, t, s);
        Tensor b = exact.denoise(z_t, t, s);
        err_mlp += dot(sub(a, z0), sub(a, z0));
        err_gmm += dot(sub(b, z0), sub(b, z0));
    }
    CHECK(err_mlp <= 2.0 * err_gmm);
    CHECK(err_gmm > 0.0);
}

TEST_CASE("training aborts with the step index when the loss diverges") {
    NoiseSchedule s = NoiseSchedule::make(20, 1e-4, 0.02);
    Rng rng(5);
    std::vector<Tensor> latents;
    for (int i = 0; i < 8; ++i) latents.push_back(Tensor::random_normal({4}, 0.0, 100.0, rng));
    DenoiserTrainConfig cfg;
    cfg.steps = 500;
    cfg.lr = 1e200;  // one step pushes the squared loss past DBL_MAX
    CHECK_THROWS_AS(train_mlp_denoiser(latents, s, cfg), NumericError);
}

}  // TEST_SUITE
