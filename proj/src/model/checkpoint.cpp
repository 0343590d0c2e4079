#include "fsu/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "fsu/error.hpp"

namespace fsu::model {
namespace {

constexpr char kMagic[4] = {'F', 'S', 'C', 'K'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  const std::vector<unsigned char>& bytes() const { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  Reader(std::vector<unsigned char> bytes, std::string where)
      : bytes_(std::move(bytes)), where_(std::move(where)) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw data_error(where_ + ": truncated checkpoint");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.begin() + pos_, bytes_.begin() + pos_ + n);
    pos_ += n;
    return s;
  }
  bool at_magic() {
    need(4);
    const bool ok = std::memcmp(bytes_.data(), kMagic, 4) == 0;
    pos_ += 4;
    return ok;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::vector<unsigned char> bytes_;
  std::string where_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(ckpt.config_echo);
  const auto tensors = ckpt.params.tensors();
  const auto& names = ModelParams::tensor_names();
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    w.str(names[i]);
    w.u32(static_cast<std::uint32_t>(tensors[i]->rows()));
    w.u32(static_cast<std::uint32_t>(tensors[i]->cols()));
    for (double v : tensors[i]->data()) w.u64(std::bit_cast<std::uint64_t>(v));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(w.bytes().data()),
            static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw data_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open checkpoint " + path.string());
  Reader r(std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                      std::istreambuf_iterator<char>()),
           path.string());
  if (!r.at_magic()) throw data_error(path.string() + ": bad checkpoint magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw data_error(path.string() + ": unsupported checkpoint version " +
                     std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config_echo = r.str();
  const std::uint32_t count = r.u32();
  auto tensors = ckpt.params.tensors();
  const auto& names = ModelParams::tensor_names();
  if (count != tensors.size()) {
    throw data_error(path.string() + ": expected " + std::to_string(tensors.size()) +
                     " tensors, found " + std::to_string(count));
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    if (name != names[i]) {
      throw data_error(path.string() + ": unexpected tensor '" + name + "'");
    }
    const std::size_t rows = r.u32();
    const std::size_t cols = r.u32();
    Tensor t(rows, cols);
    for (double& v : t.data()) v = std::bit_cast<double>(r.u64());
    *tensors[i] = std::move(t);
  }
  if (!r.done()) throw data_error(path.string() + ": trailing bytes in checkpoint");
  if (ckpt.params.classifier.rows() < 2 ||
      ckpt.params.classifier.cols() != ckpt.params.transform.rows()) {
    throw data_error(path.string() + ": inconsistent parameter shapes");
  }
  return ckpt;
}

}  // namespace fsu::model
