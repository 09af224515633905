#include "silo/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "silo/error.hpp"

namespace silo {

namespace {

constexpr char kMagic[4] = {'S', 'I', 'L', 'O'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
    put_u64(os, std::bit_cast<std::uint64_t>(v));
}

void put_string(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw CheckpointError("checkpoint truncated: " + path);
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is, const std::string& path) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) {
        throw CheckpointError("checkpoint truncated: " + path);
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is, const std::string& path) {
    return std::bit_cast<double>(get_u64(is, path));
}

std::string get_string(std::istream& is, const std::string& path) {
    const std::uint32_t len = get_u32(is, path);
    std::string s(len, '\0');
    if (!is.read(s.data(), len)) throw CheckpointError("checkpoint truncated: " + path);
    return s;
}

}  // namespace

const Tensor& Checkpoint::get(const std::string& name) const {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw CheckpointError("checkpoint has no array '" + name + "'");
    return it->second;
}

const std::string& Checkpoint::meta(const std::string& key) const {
    auto it = meta_.find(key);
    if (it == meta_.end()) throw CheckpointError("checkpoint has no metadata '" + key + "'");
    return it->second;
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot write checkpoint " + path);
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(arrays_.size()));
    put_u32(os, static_cast<std::uint32_t>(meta_.size()));
    for (const auto& [name, t] : arrays_) {
        put_string(os, name);
        put_u32(os, static_cast<std::uint32_t>(t.ndim()));
        for (auto d : t.shape()) put_u64(os, d);
        for (double v : t.data()) put_f64(os, v);
    }
    for (const auto& [key, value] : meta_) {
        put_string(os, key);
        put_string(os, value);
    }
    if (!os) throw CheckpointError("short write to checkpoint " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint " + path +
                                   " (train the required model first)");
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw CheckpointError("not a checkpoint file: " + path);
    }
    const std::uint32_t version = get_u32(is, path);
    if (version != kVersion) {
        throw CheckpointError("checkpoint " + path + " has unsupported version " +
                              std::to_string(version));
    }
    const std::uint32_t n_arrays = get_u32(is, path);
    const std::uint32_t n_meta = get_u32(is, path);
    Checkpoint ck;
    for (std::uint32_t a = 0; a < n_arrays; ++a) {
        const std::string name = get_string(is, path);
        const std::uint32_t ndim = get_u32(is, path);
        std::vector<std::size_t> shape(ndim);
        std::size_t numel = 1;
        for (auto& d : shape) {
            d = static_cast<std::size_t>(get_u64(is, path));
            numel *= d;
        }
        std::vector<double> data(numel);
        for (auto& v : data) v = get_f64(is, path);
        ck.arrays_[name] = Tensor(std::move(shape), std::move(data));
    }
    for (std::uint32_t m = 0; m < n_meta; ++m) {
        const std::string key = get_string(is, path);
        ck.meta_[key] = get_string(is, path);
    }
    return ck;
}

namespace {

std::vector<std::size_t> sizes_from_csv(const std::string& csv) {
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoull(tok));
    return out;
}

std::string sizes_to_csv(const std::vector<std::size_t>& sizes) {
    std::string out;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(sizes[i]);
    }
    return out;
}

void put_mlp(Checkpoint& ck, const Mlp& mlp, const std::string& prefix) {
    ck.set_meta(prefix + "_sizes", sizes_to_csv(mlp.sizes));
    for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
        ck.put(prefix + "_w" + std::to_string(l), mlp.weights[l]);
        ck.put(prefix + "_b" + std::to_string(l), mlp.biases[l]);
    }
}

Mlp get_mlp(const Checkpoint& ck, const std::string& prefix) {
    Mlp mlp;
    mlp.sizes = sizes_from_csv(ck.meta(prefix + "_sizes"));
    for (std::size_t l = 0; l + 1 < mlp.sizes.size(); ++l) {
        mlp.weights.push_back(ck.get(prefix + "_w" + std::to_string(l)));
        mlp.biases.push_back(ck.get(prefix + "_b" + std::to_string(l)));
    }
    return mlp;
}

void expect_kind(const Checkpoint& ck, const std::string& kind) {
    if (!ck.has_meta("kind") || ck.meta("kind") != kind) {
        throw CheckpointError("checkpoint is not a " + kind + " checkpoint");
    }
}

}  // namespace

Checkpoint codec_to_checkpoint(const LatentCodec& codec, std::size_t image_size) {
    Checkpoint ck;
    ck.set_meta("kind", "codec");
    ck.set_meta("image_size", std::to_string(image_size));
    ck.put("mean", codec.mean());
    ck.put("basis", codec.basis());
    ck.put("scales", codec.scales());
    return ck;
}

LatentCodec codec_from_checkpoint(const Checkpoint& ck) {
    expect_kind(ck, "codec");
    return LatentCodec(ck.get("mean"), ck.get("basis"), ck.get("scales"));
}

std::size_t codec_image_size(const Checkpoint& ck) {
    expect_kind(ck, "codec");
    return std::stoull(ck.meta("image_size"));
}

Checkpoint denoiser_to_checkpoint(const DenoiserModel& model) {
    Checkpoint ck;
    ck.set_meta("kind", "denoiser");
    if (model.backend() == DenoiserBackend::Mlp) {
        ck.set_meta("backend", "mlp");
        put_mlp(ck, model.mlp(), "mlp");
    } else {
        ck.set_meta("backend", "gmm");
        const auto& comps = model.gmm().components();
        ck.set_meta("components", std::to_string(comps.size()));
        Tensor weights({comps.size()});
        for (std::size_t c = 0; c < comps.size(); ++c) {
            weights[c] = comps[c].weight;
            ck.put("mean" + std::to_string(c), comps[c].mean);
            ck.put("cov" + std::to_string(c), comps[c].cov);
        }
        ck.put("weights", weights);
    }
    return ck;
}

DenoiserModel denoiser_from_checkpoint(const Checkpoint& ck) {
    expect_kind(ck, "denoiser");
    if (ck.meta("backend") == "mlp") {
        return DenoiserModel::from_mlp(get_mlp(ck, "mlp"));
    }
    const std::size_t n = std::stoull(ck.meta("components"));
    const Tensor& w = ck.get("weights");
    std::vector<double> weights(w.data());
    std::vector<Tensor> means, covs;
    for (std::size_t c = 0; c < n; ++c) {
        means.push_back(ck.get("mean" + std::to_string(c)));
        covs.push_back(ck.get("cov" + std::to_string(c)));
    }
    return DenoiserModel::from_gmm(Gmm::from(weights, means, covs));
}

Checkpoint operator_to_checkpoint(const LatentOperatorModel& model) {
    Checkpoint ck;
    ck.set_meta("kind", "operator");
    ck.set_meta("degradation", kind_name(model.kind()));
    ck.set_meta("variant", variant_name(model.variant()));
    ck.set_meta("latent_dim", std::to_string(model.latent_dim()));
    put_mlp(ck, model.mlp(), "mlp");
    return ck;
}

LatentOperatorModel operator_from_checkpoint(const Checkpoint& ck) {
    expect_kind(ck, "operator");
    return LatentOperatorModel(variant_from_name(ck.meta("variant")), get_mlp(ck, "mlp"),
                               kind_from_name(ck.meta("degradation")),
                               std::stoull(ck.meta("latent_dim")));
}

}  // namespace silo
