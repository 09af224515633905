#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace silo {

// Everything needed to reproduce a run. Serializes to a sectioned
// key = value text format; the canonical serialization hashes to the run
// directory name.
struct ExperimentConfig {
    // [dataset]
    std::size_t image_size = 16;
    std::size_t train_count = 2000;
    std::size_t test_count = 200;
    std::uint64_t master_seed = 7001;

    // [schedule]
    std::size_t steps = 200;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    // [codec]
    std::size_t latent_dim = 32;

    // [denoiser]
    std::string denoiser_backend = "mlp";  // mlp | gmm
    std::size_t denoiser_hidden = 128;
    std::size_t denoiser_layers = 2;
    std::size_t denoiser_steps = 6000;
    std::size_t denoiser_batch = 16;
    double denoiser_lr = 2e-3;
    std::size_t gmm_components = 8;
    std::uint64_t denoiser_seed = 11;

    // [operator]
    std::string operator_variant = "tcond";  // tcond | tindep
    std::size_t operator_hidden = 128;
    std::size_t operator_layers = 2;
    std::size_t operator_steps = 4000;
    std::size_t operator_batch = 16;
    double operator_lr = 1e-3;
    std::vector<double> sigma_set{0.0, 0.02, 0.06};
    bool t_zero_only = false;
    bool clamp_target = false;
    std::uint64_t operator_seed = 12;

    // [degradation]
    std::string degradation = "blur";  // identity | blur | sr2 | inpaint | jpeg
    std::size_t blur_size = 7;
    double blur_sigma = 1.0;
    std::size_t sr_factor = 2;
    double box_frac = 0.5;
    double box_fill = 0.0;
    int jpeg_quality = 10;

    // [solver]
    std::string method = "silo";  // silo | ldps | gml | psld | unguided
    std::optional<double> eta;    // empty = per-method/task default
    std::optional<double> gamma;
    double sigma_y = 0.02;
    std::uint64_t seed = 1000;
    bool detach_denoiser = false;
    bool squared_norm = false;

    // [output]
    std::string out_dir = "runs";
    std::size_t jobs = 1;
    std::size_t count = 50;  // test images to reconstruct

    std::string serialize() const;          // canonical form
    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig load(const std::string& path);
    void save(const std::string& path) const;

    // FNV-1a over the canonical serialization, 16 hex chars
    std::string hash() const;

    bool operator==(const ExperimentConfig&) const = default;
};

}  // namespace silo
