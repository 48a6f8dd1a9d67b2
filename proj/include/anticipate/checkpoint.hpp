#pragma once

#include <string>

#include "anticipate/model.hpp"

namespace anticipate {

// Binary checkpoint, little-endian:
//   magic "CKPT", u32 version=1, u32 tensor count;
//   per tensor: u32 name length, UTF-8 name, u32 rank, u32 dims[rank],
//   f32 data row-major.
// Written atomically (temp file + rename).
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

// Model checkpoints carry the architecture in a "meta.hparams" tensor so a
// checkpoint alone is enough to rebuild the model for inference.
void save_model(const std::string& path, const ModelConfig& cfg, const ModelParams& params);
std::pair<ModelConfig, ModelParams> load_model(const std::string& path);

}  // namespace anticipate
