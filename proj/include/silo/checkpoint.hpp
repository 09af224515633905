#pragma once

#include <map>
#include <string>

#include "silo/codec.hpp"
#include "silo/denoiser.hpp"
#include "silo/latent_operator.hpp"
#include "silo/tensor.hpp"

namespace silo {

// Binary container: magic "SILO", format version, named f64 arrays
// (little-endian) plus string metadata. Unknown versions are rejected at
// load, never reinterpreted.
class Checkpoint {
  public:
    static constexpr std::uint32_t kVersion = 1;

    void put(const std::string& name, Tensor t) { arrays_[name] = std::move(t); }
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const { return arrays_.count(name) != 0; }

    void set_meta(const std::string& key, const std::string& value) { meta_[key] = value; }
    const std::string& meta(const std::string& key) const;
    bool has_meta(const std::string& key) const { return meta_.count(key) != 0; }

    const std::map<std::string, Tensor>& arrays() const { return arrays_; }
    const std::map<std::string, std::string>& metadata() const { return meta_; }

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

  private:
    std::map<std::string, Tensor> arrays_;
    std::map<std::string, std::string> meta_;
};

// model <-> checkpoint adapters
Checkpoint codec_to_checkpoint(const LatentCodec& codec, std::size_t image_size);
LatentCodec codec_from_checkpoint(const Checkpoint& ck);
std::size_t codec_image_size(const Checkpoint& ck);

Checkpoint denoiser_to_checkpoint(const DenoiserModel& model);
DenoiserModel denoiser_from_checkpoint(const Checkpoint& ck);

Checkpoint operator_to_checkpoint(const LatentOperatorModel& model);
LatentOperatorModel operator_from_checkpoint(const Checkpoint& ck);

}  // namespace silo
