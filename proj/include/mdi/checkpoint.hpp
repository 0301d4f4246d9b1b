#pragma once

#include <memory>

#include "mdi/encoder.hpp"
#include "mdi/models.hpp"

namespace mdi {

// Checkpoint layout: magic "MDLK", u32 format version, length-prefixed
// canonical-JSON config block, named tensors (name, dtype tag, shape,
// little-endian f64 payload), then a metadata JSON block. Readers reject
// unknown versions.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    nlohmann::json config;
    std::map<std::string, nn::Tensor> tensors;
    nlohmann::json metadata;
};

void save_checkpoint(const std::string& path, Model& model, const nlohmann::json& metadata);
Checkpoint read_checkpoint(const std::string& path);

// Fresh model matching a config block (uninteresting init; weights come from
// the tensor map).
std::unique_ptr<Model> model_from_config(const nlohmann::json& config);

// Rebuild and load weights; tensor names and shapes must match exactly.
std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ckpt);
std::unique_ptr<Model> load_model(const std::string& path);

void copy_weights(Model& from, Model& to); // same architecture required

} // namespace mdi
