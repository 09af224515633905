#include "silo/config.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "silo/error.hpp"

namespace silo {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_sigmas(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += fmt_double(v[i]);
    }
    return out;
}

std::vector<double> parse_sigmas(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: " + key + " must be true/false, got '" + v + "'");
}

std::optional<double> parse_opt(const std::string& v) {
    if (v == "auto") return std::nullopt;
    return std::stod(v);
}

std::string fmt_opt(const std::optional<double>& v) {
    return v ? fmt_double(*v) : "auto";
}

}  // namespace

std::string ExperimentConfig::serialize() const {
    std::ostringstream os;
    os << "[dataset]\n"
       << "image_size = " << image_size << "\n"
       << "train_count = " << train_count << "\n"
       << "test_count = " << test_count << "\n"
       << "master_seed = " << master_seed << "\n"
       << "\n[schedule]\n"
       << "steps = " << steps << "\n"
       << "beta_start = " << fmt_double(beta_start) << "\n"
       << "beta_end = " << fmt_double(beta_end) << "\n"
       << "\n[codec]\n"
       << "latent_dim = " << latent_dim << "\n"
       << "\n[denoiser]\n"
       << "backend = " << denoiser_backend << "\n"
       << "hidden = " << denoiser_hidden << "\n"
       << "layers = " << denoiser_layers << "\n"
       << "train_steps = " << denoiser_steps << "\n"
       << "batch = " << denoiser_batch << "\n"
       << "lr = " << fmt_double(denoiser_lr) << "\n"
       << "gmm_components = " << gmm_components << "\n"
       << "seed = " << denoiser_seed << "\n"
       << "\n[operator]\n"
       << "variant = " << operator_variant << "\n"
       << "hidden = " << operator_hidden << "\n"
       << "layers = " << operator_layers << "\n"
       << "train_steps = " << operator_steps << "\n"
       << "batch = " << operator_batch << "\n"
       << "lr = " << fmt_double(operator_lr) << "\n"
       << "sigma_set = " << fmt_sigmas(sigma_set) << "\n"
       << "t_zero_only = " << (t_zero_only ? "true" : "false") << "\n"
       << "clamp_target = " << (clamp_target ? "true" : "false") << "\n"
       << "seed = " << operator_seed << "\n"
       << "\n[degradation]\n"
       << "kind = " << degradation << "\n"
       << "blur_size = " << blur_size << "\n"
       << "blur_sigma = " << fmt_double(blur_sigma) << "\n"
       << "sr_factor = " << sr_factor << "\n"
       << "box_frac = " << fmt_double(box_frac) << "\n"
       << "box_fill = " << fmt_double(box_fill) << "\n"
       << "jpeg_quality = " << jpeg_quality << "\n"
       << "\n[solver]\n"
       << "method = " << method << "\n"
       << "eta = " << fmt_opt(eta) << "\n"
       << "gamma = " << fmt_opt(gamma) << "\n"
       << "sigma_y = " << fmt_double(sigma_y) << "\n"
       << "seed = " << seed << "\n"
       << "detach_denoiser = " << (detach_denoiser ? "true" : "false") << "\n"
       << "squared_norm = " << (squared_norm ? "true" : "false") << "\n"
       << "\n[output]\n"
       << "dir = " << out_dir << "\n"
       << "jobs = " << jobs << "\n"
       << "count = " << count << "\n";
    return os.str();
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config line " + std::to_string(lineno) + ": bad section");
            }
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string full = section + "." + key;

        try {
            if (full == "dataset.image_size") cfg.image_size = std::stoull(value);
            else if (full == "dataset.train_count") cfg.train_count = std::stoull(value);
            else if (full == "dataset.test_count") cfg.test_count = std::stoull(value);
            else if (full == "dataset.master_seed") cfg.master_seed = std::stoull(value);
            else if (full == "schedule.steps") cfg.steps = std::stoull(value);
            else if (full == "schedule.beta_start") cfg.beta_start = std::stod(value);
            else if (full == "schedule.beta_end") cfg.beta_end = std::stod(value);
            else if (full == "codec.latent_dim") cfg.latent_dim = std::stoull(value);
            else if (full == "denoiser.backend") cfg.denoiser_backend = value;
            else if (full == "denoiser.hidden") cfg.denoiser_hidden = std::stoull(value);
            else if (full == "denoiser.layers") cfg.denoiser_layers = std::stoull(value);
            else if (full == "denoiser.train_steps") cfg.denoiser_steps = std::stoull(value);
            else if (full == "denoiser.batch") cfg.denoiser_batch = std::stoull(value);
            else if (full == "denoiser.lr") cfg.denoiser_lr = std::stod(value);
            else if (full == "denoiser.gmm_components") cfg.gmm_components = std::stoull(value);
            else if (full == "denoiser.seed") cfg.denoiser_seed = std::stoull(value);
            else if (full == "operator.variant") cfg.operator_variant = value;
            else if (full == "operator.hidden") cfg.operator_hidden = std::stoull(value);
            else if (full == "operator.layers") cfg.operator_layers = std::stoull(value);
            else if (full == "operator.train_steps") cfg.operator_steps = std::stoull(value);
            else if (full == "operator.batch") cfg.operator_batch = std::stoull(value);
            else if (full == "operator.lr") cfg.operator_lr = std::stod(value);
            else if (full == "operator.sigma_set") cfg.sigma_set = parse_sigmas(value);
            else if (full == "operator.t_zero_only") cfg.t_zero_only = parse_bool(value, full);
            else if (full == "operator.clamp_target") cfg.clamp_target = parse_bool(value, full);
            else if (full == "operator.seed") cfg.operator_seed = std::stoull(value);
            else if (full == "degradation.kind") cfg.degradation = value;
            else if (full == "degradation.blur_size") cfg.blur_size = std::stoull(value);
            else if (full == "degradation.blur_sigma") cfg.blur_sigma = std::stod(value);
            else if (full == "degradation.sr_factor") cfg.sr_factor = std::stoull(value);
            else if (full == "degradation.box_frac") cfg.box_frac = std::stod(value);
            else if (full == "degradation.box_fill") cfg.box_fill = std::stod(value);
            else if (full == "degradation.jpeg_quality") cfg.jpeg_quality = std::stoi(value);
            else if (full == "solver.method") cfg.method = value;
            else if (full == "solver.eta") cfg.eta = parse_opt(value);
            else if (full == "solver.gamma") cfg.gamma = parse_opt(value);
            else if (full == "solver.sigma_y") cfg.sigma_y = std::stod(value);
            else if (full == "solver.seed") cfg.seed = std::stoull(value);
            else if (full == "solver.detach_denoiser") cfg.detach_denoiser = parse_bool(value, full);
            else if (full == "solver.squared_norm") cfg.squared_norm = parse_bool(value, full);
            else if (full == "output.dir") cfg.out_dir = value;
            else if (full == "output.jobs") cfg.jobs = std::stoull(value);
            else if (full == "output.count") cfg.count = std::stoull(value);
            else throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" +
                                   full + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("config line " + std::to_string(lineno) + ": bad value for '" +
                              full + "': '" + value + "'");
        }
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

void ExperimentConfig::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write config " + path);
    f << serialize();
}

std::string ExperimentConfig::hash() const {
    const std::string text = serialize();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

}  // namespace silo
