#pragma once

// Binary checkpoint layout (all integers and reals little-endian):
//
//   magic        8 bytes  "FLSMCKPT"
//   version      u32      currently 1
//   n_dims       u32      number of entries in layer_dims
//   layer_dims   u32 * n_dims   [input, hidden..., feature]
//   num_classes  u32
//   parameters   f64 * parameter_count, in for_each_tensor order

#include "fedlsm/nn.hpp"

#include <filesystem>
#include <string>

namespace fedlsm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(const std::string& bytes);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

} // namespace fedlsm
