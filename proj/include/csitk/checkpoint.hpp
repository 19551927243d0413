#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "csitk/model.hpp"
#include "csitk/tensor.hpp"

namespace csitk::io {

// Named-tensor checkpoint: <dir>/manifest.json (magic "CSIC", version, meta,
// name/shape/offset table) + <dir>/params.bin (little-endian float64 blobs in
// manifest order). Shared by model and baseline checkpoints.
inline constexpr const char* kCheckpointMagic = "CSIC";
inline constexpr int kCheckpointVersion = 1;

struct NamedTensors {
  nlohmann::json meta;  // free-form: config echo, seed, optimizer step, ...
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
};

void write_checkpoint(const std::string& dir, const NamedTensors& ckpt);
NamedTensors read_checkpoint(const std::string& dir);

nlohmann::json model_config_to_json(const model::ModelConfig& config);
model::ModelConfig model_config_from_json(const nlohmann::json& j);

// Transformer-specific wrappers; validate shapes against the stored config.
void save_model(const std::string& dir, const model::TransformerModel& m,
                nlohmann::json extra_meta = {});
model::TransformerModel load_model(const std::string& dir);

}  // namespace csitk::io
