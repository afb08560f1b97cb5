#pragma once

// Checkpoint container.
//
// Layout (all integers and floats little-endian):
//   "AOIQCKPT"  8 bytes magic
//   u32         format version (kCheckpointVersion)
//   u32         section count
//   per section:
//     str       section name             (str = u32 byte length + bytes)
//     u32       attribute count, then (str key, str value) pairs
//     u32       tensor count, then per tensor: str name, u32 rows, u32 cols,
//               rows*cols f64 values in column-major order
//     u64       optimizer step counter
//     u32       moment count (0 or tensor count), then per moment:
//               rows*cols f64 first moment, rows*cols f64 second moment

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aoiq/nn/adam.hpp"
#include "aoiq/nn/tensor.hpp"

namespace aoiq::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'A', 'O', 'I', 'Q', 'C', 'K', 'P', 'T'};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Eigen::MatrixXd value;
};

struct CheckpointSection {
  std::string name;
  std::map<std::string, std::string> attributes;
  std::vector<NamedTensor> tensors;
  std::uint64_t optimizer_step = 0;
  std::vector<Eigen::MatrixXd> first_moments;
  std::vector<Eigen::MatrixXd> second_moments;

  const std::string& attribute(const std::string& key) const {
    auto it = attributes.find(key);
    if (it == attributes.end()) throw CheckpointError("section " + name + " lacks attribute " + key);
    return it->second;
  }
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::vector<CheckpointSection> sections;

  const CheckpointSection& section(const std::string& name) const {
    for (const auto& s : sections)
      if (s.name == name) return s;
    throw CheckpointError("checkpoint has no section " + name);
  }
  bool has_section(const std::string& name) const {
    for (const auto& s : sections)
      if (s.name == name) return true;
    return false;
  }
};

namespace detail {

class Writer {
 public:
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  void matrix(const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  template <typename T>
  void put_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void raw(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  Eigen::MatrixXd matrix(std::uint32_t rows, std::uint32_t cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
    return m;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint truncated");
  }
  template <typename T>
  T get_le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<char> serialize_checkpoint(const Checkpoint& ckpt) {
  detail::Writer w;
  w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(ckpt.version);
  w.u32(static_cast<std::uint32_t>(ckpt.sections.size()));
  for (const auto& s : ckpt.sections) {
    w.str(s.name);
    w.u32(static_cast<std::uint32_t>(s.attributes.size()));
    for (const auto& [k, v] : s.attributes) {
      w.str(k);
      w.str(v);
    }
    w.u32(static_cast<std::uint32_t>(s.tensors.size()));
    for (const auto& t : s.tensors) {
      w.str(t.name);
      w.u32(static_cast<std::uint32_t>(t.value.rows()));
      w.u32(static_cast<std::uint32_t>(t.value.cols()));
      w.matrix(t.value);
    }
    w.u64(s.optimizer_step);
    if (!s.first_moments.empty() &&
        (s.first_moments.size() != s.tensors.size() || s.second_moments.size() != s.tensors.size()))
      throw CheckpointError("section " + s.name + ": moment count does not match tensor count");
    w.u32(static_cast<std::uint32_t>(s.first_moments.size()));
    for (std::size_t k = 0; k < s.first_moments.size(); ++k) {
      const auto& shape = s.tensors[k].value;
      if (s.first_moments[k].rows() != shape.rows() || s.first_moments[k].cols() != shape.cols() ||
          s.second_moments[k].rows() != shape.rows() || s.second_moments[k].cols() != shape.cols())
        throw CheckpointError("section " + s.name + ": moment shape mismatch");
      w.matrix(s.first_moments[k]);
      w.matrix(s.second_moments[k]);
    }
  }
  return w.bytes();
}

inline Checkpoint deserialize_checkpoint(std::vector<char> bytes) {
  detail::Reader r(std::move(bytes));
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw CheckpointError("not a checkpoint file");
  Checkpoint ckpt;
  ckpt.version = r.u32();
  if (ckpt.version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(ckpt.version));
  const std::uint32_t nsec = r.u32();
  for (std::uint32_t i = 0; i < nsec; ++i) {
    CheckpointSection s;
    s.name = r.str();
    const std::uint32_t nattr = r.u32();
    for (std::uint32_t a = 0; a < nattr; ++a) {
      std::string k = r.str();
      s.attributes[k] = r.str();
    }
    const std::uint32_t nt = r.u32();
    for (std::uint32_t t = 0; t < nt; ++t) {
      NamedTensor nt_;
      nt_.name = r.str();
      const std::uint32_t rows = r.u32(), cols = r.u32();
      nt_.value = r.matrix(rows, cols);
      s.tensors.push_back(std::move(nt_));
    }
    s.optimizer_step = r.u64();
    const std::uint32_t nm = r.u32();
    if (nm != 0 && nm != nt) throw CheckpointError("section " + s.name + ": bad moment count");
    for (std::uint32_t k = 0; k < nm; ++k) {
      const auto rows = static_cast<std::uint32_t>(s.tensors[k].value.rows());
      const auto cols = static_cast<std::uint32_t>(s.tensors[k].value.cols());
      s.first_moments.push_back(r.matrix(rows, cols));
      s.second_moments.push_back(r.matrix(rows, cols));
    }
    ckpt.sections.push_back(std::move(s));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint");
  return ckpt;
}

/// Writes to a sibling temporary file and renames it into place, so readers
/// never observe a partially written checkpoint.
inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(std::move(bytes));
}

/// Captures a parameter list (and optionally its optimizer) as a section.
template <typename Scalar>
CheckpointSection make_section(const std::string& name, const ParameterList<Scalar>& params,
                               const Adam<Scalar>* optimizer = nullptr,
                               std::map<std::string, std::string> attributes = {}) {
  CheckpointSection s;
  s.name = name;
  s.attributes = std::move(attributes);
  for (const auto* p : params) s.tensors.push_back({p->name, p->value.template cast<double>()});
  if (optimizer) {
    s.optimizer_step = optimizer->steps();
    for (const auto& m : optimizer->first_moments()) s.first_moments.push_back(m.template cast<double>());
    for (const auto& v : optimizer->second_moments()) s.second_moments.push_back(v.template cast<double>());
  }
  return s;
}

/// Restores tensors by position, checking names and shapes.
template <typename Scalar>
void restore_section(const CheckpointSection& s, const ParameterList<Scalar>& params, Adam<Scalar>* optimizer = nullptr) {
  if (s.tensors.size() != params.size())
    throw CheckpointError("section " + s.name + ": expected " + std::to_string(params.size()) + " tensors, found " +
                          std::to_string(s.tensors.size()));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& t = s.tensors[k];
    auto& p = *params[k];
    if (t.name != p.name) throw CheckpointError("section " + s.name + ": tensor " + t.name + " where " + p.name + " expected");
    if (t.value.rows() != p.value.rows() || t.value.cols() != p.value.cols())
      throw CheckpointError("section " + s.name + ": shape mismatch for " + p.name);
    p.value = t.value.template cast<Scalar>();
    p.zero_grad();
  }
  if (optimizer) {
    std::vector<Matrix<Scalar>> first, second;
    for (const auto& m : s.first_moments) first.push_back(m.template cast<Scalar>());
    for (const auto& v : s.second_moments) second.push_back(v.template cast<Scalar>());
    *optimizer = Adam<Scalar>(optimizer->config());
    if (!first.empty() || s.optimizer_step != 0) optimizer->restore(s.optimizer_step, std::move(first), std::move(second));
  }
}

}  // namespace aoiq::nn
