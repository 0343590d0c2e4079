#pragma once

#include <cstdint>
#include <filesystem>

#include "fsu/numgrad/tensor.hpp"

namespace fsu::data {

// SEGF binary layout, all little-endian:
//   "SEGF" | u32 version (=1) | u32 T | u32 d_in | T*d_in f32, row-major
inline constexpr char kSegfMagic[4] = {'S', 'E', 'G', 'F'};
inline constexpr std::uint32_t kSegfVersion = 1;
inline constexpr std::size_t kSegfHeaderBytes = 16;

// Values are narrowed to f32 on write.
void write_feature_file(const numgrad::Tensor& features,
                        const std::filesystem::path& path);
numgrad::Tensor read_feature_file(const std::filesystem::path& path);

// Rounds every entry to the nearest f32, i.e. the value a SEGF round-trip
// would produce.
numgrad::Tensor quantize_to_f32(numgrad::Tensor t);

}  // namespace fsu::data
