#include "fsu/data/segf.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "fsu/error.hpp"

namespace fsu::data {
namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_feature_file(const numgrad::Tensor& features,
                        const std::filesystem::path& path) {
  std::vector<unsigned char> bytes;
  bytes.reserve(kSegfHeaderBytes + 4 * features.size());
  bytes.insert(bytes.end(), kSegfMagic, kSegfMagic + 4);
  put_u32(bytes, kSegfVersion);
  put_u32(bytes, static_cast<std::uint32_t>(features.rows()));
  put_u32(bytes, static_cast<std::uint32_t>(features.cols()));
  for (double v : features.data()) {
    put_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw data_error("write failed: " + path.string());
}

numgrad::Tensor read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open feature file " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const std::string where = path.string();
  if (bytes.size() < 4) throw data_error(where + ": truncated SEGF header");
  if (std::memcmp(bytes.data(), kSegfMagic, 4) != 0) {
    throw data_error(where + ": bad magic (expected SEGF)");
  }
  if (bytes.size() < kSegfHeaderBytes) {
    throw data_error(where + ": truncated SEGF header");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kSegfVersion) {
    throw data_error(where + ": unsupported SEGF version " +
                     std::to_string(version));
  }
  const std::size_t rows = get_u32(bytes.data() + 8);
  const std::size_t cols = get_u32(bytes.data() + 12);
  const std::size_t expected = kSegfHeaderBytes + 4 * rows * cols;
  if (bytes.size() < expected) {
    throw data_error(where + ": truncated SEGF payload (" +
                     std::to_string(bytes.size()) + " of " +
                     std::to_string(expected) + " bytes)");
  }
  if (bytes.size() > expected) {
    throw data_error(where + ": trailing bytes after SEGF payload");
  }
  numgrad::Tensor t(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    t[i] = std::bit_cast<float>(get_u32(bytes.data() + kSegfHeaderBytes + 4 * i));
  }
  return t;
}

numgrad::Tensor quantize_to_f32(numgrad::Tensor t) {
  for (double& v : t.data()) v = static_cast<float>(v);
  return t;
}

}  // namespace fsu::data
