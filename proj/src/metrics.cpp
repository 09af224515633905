#include "silo/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "silo/error.hpp"

namespace silo {

double psnr(const Tensor& x, const Tensor& xhat) {
    if (!x.same_shape(xhat)) {
        throw ShapeError("psnr: shape mismatch (" + x.shape_str() + " vs " + xhat.shape_str() +
                         ")");
    }
    double mse = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double d = x[i] - xhat[i];
        mse += d * d;
    }
    mse /= static_cast<double>(x.numel());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(4.0 / mse));
}

double psnr(const ImageSample& x, const ImageSample& xhat) {
    return psnr(x.as_tensor(), xhat.as_tensor());
}

double cpsnr(const ImageSample& x, const ImageSample& xhat, const DegradationOp& op) {
    return psnr(op.apply(x), op.apply(xhat));
}

namespace {

void fit_gaussian(const LatentCodec& codec, const std::vector<ImageSample>& set,
                  Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
    const auto k = static_cast<Eigen::Index>(codec.latent_dim());
    mean = Eigen::VectorXd::Zero(k);
    std::vector<Eigen::VectorXd> feats;
    feats.reserve(set.size());
    for (const auto& img : set) {
        Tensor z = codec.encode(img);
        feats.emplace_back(Eigen::Map<const Eigen::VectorXd>(z.data().data(), k));
        mean += feats.back();
    }
    mean /= static_cast<double>(set.size());
    cov = Eigen::MatrixXd::Zero(k, k);
    for (const auto& f : feats) {
        const Eigen::VectorXd c = f - mean;
        cov += c * c.transpose();
    }
    cov /= static_cast<double>(set.size());
}

}  // namespace

FrechetResult frechet_proxy(const LatentCodec& codec, const std::vector<ImageSample>& set_a,
                            const std::vector<ImageSample>& set_b) {
    if (set_a.empty() || set_b.empty()) throw ConfigError("frechet_proxy: empty image set");
    Eigen::VectorXd mu_a, mu_b;
    Eigen::MatrixXd cov_a, cov_b;
    fit_gaussian(codec, set_a, mu_a, cov_a);
    fit_gaussian(codec, set_b, mu_b, cov_b);

    FrechetResult res;
    const double mean_term = (mu_a - mu_b).squaredNorm();

    // tr((Sa Sb)^{1/2}) via Sa^{1/2} Sb Sa^{1/2}, which is symmetric PSD
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_a(cov_a);
    Eigen::VectorXd da = eig_a.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd sqrt_a = eig_a.eigenvectors() * da.asDiagonal() * eig_a.eigenvectors().transpose();
    Eigen::MatrixXd inner = sqrt_a * cov_b * sqrt_a;
    inner = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_i(inner);
    double tr_sqrt = 0.0;
    for (Eigen::Index i = 0; i < eig_i.eigenvalues().size(); ++i) {
        const double ev = eig_i.eigenvalues()(i);
        if (ev < -1e-9 * std::abs(eig_i.eigenvalues().maxCoeff())) {
            res.symmetrized_fallback = true;
        }
        tr_sqrt += std::sqrt(std::max(ev, 0.0));
    }
    res.distance = mean_term + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
    if (res.distance < 0.0 && res.distance > -1e-9) res.distance = 0.0;
    return res;
}

std::string EvalReport::table(const std::string& label) const {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-22s %10s %10s %16s %12s\n", label.c_str(), "PSNR",
                  "CPSNR", "proxy-Frechet", "time[ms]");
    os << buf;
    std::snprintf(buf, sizeof(buf), "%-22s %7.2f dB %7.2f dB %16.4f %12.2f\n", "",
                  mean_psnr, mean_cpsnr, frechet, mean_wall_ms);
    os << buf;
    if (frechet_fallback) os << "  (proxy-Frechet used symmetrization fallback)\n";
    return os.str();
}

std::string EvalReport::records() const {
    std::ostringstream os;
    for (const auto& r : per_image) {
        os << "idx=" << r.index << " psnr=" << r.psnr << " cpsnr=" << r.cpsnr
           << " wall_ms=" << r.wall_ms << "\n";
    }
    return os.str();
}

EvalReport evaluate_run(const std::vector<ImageSample>& reconstructions,
                        const std::vector<ImageSample>& test, const DegradationOp& op,
                        const LatentCodec& codec, const std::vector<double>& wall_ms) {
    if (reconstructions.size() != test.size()) {
        throw ConfigError("evaluate_run: " + std::to_string(reconstructions.size()) +
                          " reconstructions vs " + std::to_string(test.size()) + " test images");
    }
    if (!wall_ms.empty() && wall_ms.size() != test.size()) {
        throw ConfigError("evaluate_run: wall-time count does not match image count");
    }
    EvalReport rep;
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (reconstructions[i].seed != test[i].seed) {
            throw ConfigError("evaluate_run: reconstruction " + std::to_string(i) +
                              " is not aligned with its test image (seed mismatch)");
        }
        PerImageEval pe;
        pe.index = i;
        pe.psnr = psnr(test[i], reconstructions[i]);
        pe.cpsnr = cpsnr(test[i], reconstructions[i], op);
        pe.wall_ms = wall_ms.empty() ? 0.0 : wall_ms[i];
        rep.per_image.push_back(pe);
    }
    const double n = static_cast<double>(test.size());
    for (const auto& r : rep.per_image) {
        rep.mean_psnr += r.psnr;
        rep.mean_cpsnr += r.cpsnr;
        rep.mean_wall_ms += r.wall_ms;
    }
    rep.mean_psnr /= n;
    rep.mean_cpsnr /= n;
    rep.mean_wall_ms /= n;
    for (const auto& r : rep.per_image) {
        rep.std_psnr += (r.psnr - rep.mean_psnr) * (r.psnr - rep.mean_psnr);
        rep.std_cpsnr += (r.cpsnr - rep.mean_cpsnr) * (r.cpsnr - rep.mean_cpsnr);
    }
    rep.std_psnr = std::sqrt(rep.std_psnr / n);
    rep.std_cpsnr = std::sqrt(rep.std_cpsnr / n);
    auto fr = frechet_proxy(codec, test, reconstructions);
    rep.frechet = fr.distance;
    rep.frechet_fallback = fr.symmetrized_fallback;
    return rep;
}

}  // namespace silo
