// SPDX-License-Identifier: Apache-2.0
#pragma once

// Checkpoint layout, all integers little-endian:
//
//   "GLSR"                       magic, 4 bytes
//   u32 version                  = 1
//   u32 channels, u32 blocks, u32 scale, u32 flags (bit0 scam, bit1 cfc, bit2 glie)
//   u32 tensor count
//   per tensor:
//     u16 name length, name bytes (UTF-8)
//     u8 rank, rank x u32 dims
//     prod(dims) x f32 (IEEE-754, little-endian)

#include <bit>
#include <cstdint>
#include <cstring>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glsr/errors.hpp"
#include "glsr/image.hpp"
#include "glsr/model.hpp"

namespace glsr {

inline constexpr char kCheckpointMagic[4] = {'G', 'L', 'S', 'R'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
struct Checkpoint {
  ModelConfig config;
  WeightStore<T> weights;
};

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}

  std::uint8_t u8() {
    need(1, "u8");
    return b_[pos_++];
  }
  std::uint16_t u16() {
    need(2, "u16");
    std::uint16_t v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n, "string");
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) throw ParseError(std::string("checkpoint truncated reading ") + what, pos_);
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const ModelConfig& cfg, const WeightStore<T>& weights) {
  validate_weights(weights, cfg);
  const auto specs = layer_enumeration(cfg);
  detail::ByteWriter w;
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(cfg.channels));
  w.u32(static_cast<std::uint32_t>(cfg.blocks));
  w.u32(static_cast<std::uint32_t>(cfg.scale));
  w.u32((cfg.enable_scam ? 1u : 0u) | (cfg.enable_cfc ? 2u : 0u) | (cfg.enable_glie ? 4u : 0u));
  w.u32(static_cast<std::uint32_t>(specs.size()));
  for (const auto& spec : specs) {
    w.u16(static_cast<std::uint16_t>(spec.path.size()));
    w.bytes(spec.path.data(), spec.path.size());
    w.u8(static_cast<std::uint8_t>(spec.dims.size()));
    for (auto d : spec.dims) w.u32(static_cast<std::uint32_t>(d));
    for (T v : weights.at(spec.path).data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

/// Decodes and validates every tensor against the layer enumeration of
/// `expected` when given, otherwise of the config stored in the file.
template <typename T>
Checkpoint<T> decode_checkpoint(std::span<const std::uint8_t> bytes, const ModelConfig* expected = nullptr) {
  detail::ByteReader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw ParseError("checkpoint: bad magic (expected GLSR)", 0);
  }
  r.str(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version), 4);
  }
  Checkpoint<T> ck;
  ck.config.channels = r.u32();
  ck.config.blocks = r.u32();
  ck.config.scale = r.u32();
  const std::uint32_t flags = r.u32();
  ck.config.enable_scam = flags & 1u;
  ck.config.enable_cfc = flags & 2u;
  ck.config.enable_glie = flags & 4u;
  const ModelConfig& target = expected ? *expected : ck.config;
  target.validate();

  std::map<std::string, ParamSpec> specs;
  for (auto& s : layer_enumeration(target)) specs.emplace(s.path, s);

  const std::uint32_t count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::size_t at = r.pos();
    const std::string name = r.str(r.u16());
    const std::uint8_t rank = r.u8();
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = r.u32();
    auto it = specs.find(name);
    if (it == specs.end()) throw StructuralError("checkpoint: unexpected parameter " + name);
    if (dims != it->second.dims) {
      std::string got, want;
      for (auto d : dims) got += (got.empty() ? "" : ",") + std::to_string(d);
      for (auto d : it->second.dims) want += (want.empty() ? "" : ",") + std::to_string(d);
      throw StructuralError("checkpoint: parameter " + name + " has shape [" + got + "], config expects [" + want +
                            "] (record at byte " + std::to_string(at) + ")");
    }
    Tensor<T> tensor(it->second.shape());
    for (auto& v : tensor.data()) v = static_cast<T>(r.f32());
    ck.weights.set(name, std::move(tensor));
  }
  if (!r.done()) throw ParseError("checkpoint: trailing bytes", r.pos());
  if (expected) ck.config = *expected;
  validate_weights(ck.weights, ck.config);
  return ck;
}

template <typename T>
void save_weights(const std::string& path, const ModelConfig& cfg, const WeightStore<T>& weights) {
  write_file(path, encode_checkpoint(cfg, weights));
}

template <typename T = float>
Checkpoint<T> load_weights(const std::string& path, const ModelConfig* expected = nullptr) {
  const auto bytes = read_file(path);
  return decode_checkpoint<T>(bytes, expected);
}

}  // namespace glsr
