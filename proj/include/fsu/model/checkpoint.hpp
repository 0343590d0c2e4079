#pragma once

#include <filesystem>
#include <string>

#include "fsu/model/model.hpp"

namespace fsu::model {

// Checkpoint layout, little-endian:
//   "FSCK" | u32 version (=1)
//   u32 echo_bytes | echo (UTF-8 "key = value" lines of the run config)
//   u32 tensor_count
//   per tensor: u32 name_bytes | name | u32 rows | u32 cols | rows*cols f64
struct Checkpoint {
  ModelParams params;
  std::string config_echo;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fsu::model
