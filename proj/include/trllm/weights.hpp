#pragma once

// Named-tensor weight container ("TRLW").
//
// Layout, all integers little-endian, no padding:
//   magic "TRLW" | u32 version (=1) | u32 tensor_count |
//   per tensor: u32 name_len | name bytes | u8 dtype (0 = float32) | u8 ndim |
//               ndim x u32 dims | float32 payload, row-major

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "trllm/errors.hpp"

namespace trllm {

struct Tensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
  bool operator==(const Tensor&) const = default;
};

class WeightContainer {
public:
  static constexpr std::uint32_t kVersion = 1;

  WeightContainer() = default;
  explicit WeightContainer(std::vector<Tensor> tensors) {
    for (auto& t : tensors) add(std::move(t));
  }

  void add(Tensor t) {
    if (t.element_count() != t.data.size()) {
      throw ValidationError("tensor '" + t.name + "': dims do not match data length");
    }
    if (t.dims.size() > 255) throw ValidationError("tensor '" + t.name + "': too many dimensions");
    if (!index_.emplace(t.name, tensors_.size()).second) {
      throw ValidationError("duplicate tensor name '" + t.name + "'");
    }
    tensors_.push_back(std::move(t));
  }

  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::uint32_t version() const { return kVersion; }

  const Tensor* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &tensors_[it->second];
  }

  bool operator==(const WeightContainer& o) const { return tensors_ == o.tensors_; }

private:
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class ByteReader {
public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw LengthError(std::string("weight container truncated in ") + what);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize_weights(const WeightContainer& wc) {
  std::vector<std::uint8_t> out{'T', 'R', 'L', 'W'};
  detail::put_u32(out, WeightContainer::kVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(wc.tensors().size()));
  for (const auto& t : wc.tensors()) {
    detail::put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    out.push_back(0);  // float32
    out.push_back(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) detail::put_u32(out, d);
    for (float f : t.data) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

inline WeightContainer deserialize_weights(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes);
  auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), "TRLW", 4) != 0) throw FormatError("weight container: bad magic");
  const auto version = in.u32("version");
  if (version != WeightContainer::kVersion) {
    throw FormatError("weight container: unsupported version " + std::to_string(version));
  }
  const auto count = in.u32("tensor count");
  WeightContainer wc;
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t;
    const auto name_len = in.u32("name length");
    auto name = in.take(name_len, "name");
    t.name.assign(name.begin(), name.end());
    const auto dtype = in.u8("dtype");
    if (dtype != 0) throw FormatError("tensor '" + t.name + "': unsupported dtype " + std::to_string(dtype));
    const auto ndim = in.u8("ndim");
    std::uint64_t elements = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      t.dims.push_back(in.u32("dims"));
      elements *= t.dims.back();
    }
    in.need(elements * 4, "payload");
    t.data.resize(static_cast<std::size_t>(elements));
    for (auto& f : t.data) f = std::bit_cast<float>(in.u32("payload"));
    wc.add(std::move(t));
  }
  if (!in.at_end()) throw LengthError("weight container: trailing bytes after last tensor");
  return wc;
}

inline void save_weights(const WeightContainer& wc, const std::filesystem::path& path) {
  const auto bytes = serialize_weights(wc);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline WeightContainer load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_weights(bytes);
}

}  // namespace trllm
