// SPDX-License-Identifier: Apache-2.0
#pragma once

// Global-local super-resolution network.
//
//   LR -> Conv3x3 head -> N x Block -> global-local extraction -> Conv3x3 tail
//      -> PixelShuffle(s) -> SR
//
// Block:  x1 = x + SCAM(x),  out = x1 + CFC(x1)
//
// SCAM (spatial/channel adaptive modulation):
//   part 1: X1 = X * Conv1x1(GAP(LN(X)))                      per-channel gate
//   part 2: split X1 into 4 channel groups; group 0 -> depthwise 3x3,
//           group i (1..3) -> maxpool(2^i) -> depthwise 3x3 -> nearest up(2^i);
//           X2 = Conv1x1(concat) * X1                         spatial gate
//
// CFC (channel fusion convolution):
//   [Y1, Y2] = split(Conv3x3_{C->2C}(LN(Y))),  out = Conv1x1(Y1 * Y2)
//
// Global-local extraction:
//   Zhat = concat(2x2 phase sub-maps of Z)  (4C, H/2, W/2)
//   out  = concat(PixelShuffle_2(Conv1x1(Zhat)), Z)           (2C, H, W)

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "glsr/errors.hpp"
#include "glsr/graph.hpp"
#include "glsr/ops.hpp"
#include "glsr/random.hpp"
#include "glsr/tensor.hpp"

namespace glsr {

enum class Precision { f32, f64 };

struct ModelConfig {
  std::size_t channels = 16;
  std::size_t blocks = 2;
  std::size_t scale = 2;
  bool enable_scam = true;
  bool enable_cfc = true;
  bool enable_glie = true;
  Precision dtype = Precision::f32;

  void validate() const {
    if (channels == 0 || channels % 4 != 0) {
      throw ConfigError("channels must be a positive multiple of 4, got " + std::to_string(channels));
    }
    if (blocks == 0) throw ConfigError("blocks must be positive");
    if (scale < 2 || scale > 4) throw ConfigError("scale must be 2, 3 or 4, got " + std::to_string(scale));
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Spatial granularity the trunk needs (the coarsest SCAM pooling rate).
inline constexpr std::size_t kPadMultiple = 8;
inline constexpr double kNormEps = 1e-6;

enum class ParamKind { conv_weight, conv_bias, norm_gamma, norm_beta };

struct ParamSpec {
  std::string path;
  std::vector<std::size_t> dims;  // logical shape: 4 for conv weights, 1 otherwise
  ParamKind kind;
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;

  std::size_t count() const {
    std::size_t c = 1;
    for (auto d : dims) c *= d;
    return c;
  }
  Shape shape() const {
    Shape s;
    std::size_t* f[4] = {&s.n, &s.c, &s.h, &s.w};
    for (std::size_t i = 0; i < dims.size(); ++i) *f[i] = dims[i];
    return s;
  }
};

namespace detail {

inline void add_conv(std::vector<ParamSpec>& out, const std::string& name, std::size_t cin, std::size_t cout,
                     std::size_t k, std::size_t groups = 1) {
  const std::size_t fan_in = (cin / groups) * k * k;
  const std::size_t fan_out = cout * k * k;
  out.push_back({name + ".w", {cout, cin / groups, k, k}, ParamKind::conv_weight, fan_in, fan_out});
  out.push_back({name + ".b", {cout}, ParamKind::conv_bias, fan_in, fan_out});
}

inline void add_norm(std::vector<ParamSpec>& out, const std::string& name, std::size_t c) {
  out.push_back({name + ".gamma", {c}, ParamKind::norm_gamma});
  out.push_back({name + ".beta", {c}, ParamKind::norm_beta});
}

}  // namespace detail

/// Every learnable tensor of the network, in a fixed order.
inline std::vector<ParamSpec> layer_enumeration(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t C = cfg.channels;
  const std::size_t q = C / 4;
  std::vector<ParamSpec> out;
  detail::add_conv(out, "head", 3, C, 3);
  for (std::size_t i = 0; i < cfg.blocks; ++i) {
    const std::string b = "block." + std::to_string(i);
    if (cfg.enable_scam) {
      detail::add_norm(out, b + ".scam.norm", C);
      detail::add_conv(out, b + ".scam.channel", C, C, 1);
      for (std::size_t g = 0; g < 4; ++g) detail::add_conv(out, b + ".scam.dw" + std::to_string(g), q, q, 3, q);
      detail::add_conv(out, b + ".scam.fuse", C, C, 1);
    }
    if (cfg.enable_cfc) {
      detail::add_norm(out, b + ".cfc.norm", C);
      detail::add_conv(out, b + ".cfc.expand", C, 2 * C, 3);
      detail::add_conv(out, b + ".cfc.fuse", C, C, 1);
    }
  }
  if (cfg.enable_glie) detail::add_conv(out, "glie.fuse", 4 * C, 4 * C, 1);
  detail::add_conv(out, "tail", cfg.enable_glie ? 2 * C : C, 3 * cfg.scale * cfg.scale, 3);
  return out;
}

/// Ordered map from parameter path to tensor. Iterates in insertion order.
template <typename T>
class WeightStore {
 public:
  using Entry = std::pair<std::string, Tensor<T>>;

  void set(const std::string& path, Tensor<T> t) {
    auto it = index_.find(path);
    if (it != index_.end()) {
      entries_[it->second].second = std::move(t);
      return;
    }
    index_.emplace(path, entries_.size());
    entries_.emplace_back(path, std::move(t));
  }

  bool contains(const std::string& path) const { return index_.count(path) != 0; }

  const Tensor<T>& at(const std::string& path) const { return entries_[lookup(path)].second; }
  Tensor<T>& at(const std::string& path) { return entries_[lookup(path)].second; }

  std::size_t size() const { return entries_.size(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.size();
    return n;
  }

  template <typename U>
  WeightStore<U> cast() const {
    WeightStore<U> out;
    for (const auto& [p, t] : entries_) out.set(p, t.template cast<U>());
    return out;
  }

  friend bool operator==(const WeightStore& a, const WeightStore& b) { return a.entries_ == b.entries_; }

 private:
  std::size_t lookup(const std::string& path) const {
    auto it = index_.find(path);
    if (it == index_.end()) throw StructuralError("missing parameter " + path);
    return it->second;
  }

  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Xavier-uniform conv weights, zero biases, unit LayerNorm scale.
template <typename T>
WeightStore<T> init_weights(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  WeightStore<T> store;
  for (const auto& spec : layer_enumeration(cfg)) {
    Tensor<T> t(spec.shape());
    switch (spec.kind) {
      case ParamKind::conv_weight: {
        const double a = std::sqrt(6.0 / static_cast<double>(spec.fan_in + spec.fan_out));
        for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-a, a));
        break;
      }
      case ParamKind::norm_gamma:
        t.fill(T(1));
        break;
      case ParamKind::conv_bias:
      case ParamKind::norm_beta:
        break;
    }
    store.set(spec.path, std::move(t));
  }
  return store;
}

/// Throws StructuralError naming the first missing, mis-shaped or extra path.
template <typename T>
void validate_weights(const WeightStore<T>& store, const ModelConfig& cfg) {
  const auto specs = layer_enumeration(cfg);
  std::map<std::string, bool> expected;
  for (const auto& spec : specs) {
    expected[spec.path] = true;
    if (!store.contains(spec.path)) throw StructuralError("missing parameter " + spec.path);
    const Shape got = store.at(spec.path).shape();
    if (got != spec.shape()) {
      throw StructuralError("parameter " + spec.path + ": expected shape " + spec.shape().str() + ", got " + got.str());
    }
  }
  for (const auto& [path, t] : store) {
    if (!expected.count(path)) throw StructuralError("unexpected parameter " + path);
  }
}

/// Parameters registered as leaves of one graph.
template <typename T>
class ParamBinding {
 public:
  void bind(const std::string& path, Var<T> v) { vars_[path] = v; }
  Var<T> operator[](const std::string& path) const {
    auto it = vars_.find(path);
    if (it == vars_.end()) throw StructuralError("missing parameter " + path);
    return it->second;
  }
  const std::map<std::string, Var<T>>& vars() const { return vars_; }

 private:
  std::map<std::string, Var<T>> vars_;
};

template <typename T>
ParamBinding<T> bind_weights(Graph<T>& g, const WeightStore<T>& store, bool requires_grad) {
  ParamBinding<T> b;
  for (const auto& [path, t] : store) b.bind(path, g.leaf(t, requires_grad));
  return b;
}

namespace detail {
template <typename T>
Var<T> conv(Var<T> x, const ParamBinding<T>& p, const std::string& name, std::size_t pad = 0, std::size_t groups = 1) {
  return conv2d(x, p[name + ".w"], p[name + ".b"], ConvOptions{1, pad, groups});
}
template <typename T>
Var<T> norm(Var<T> x, const ParamBinding<T>& p, const std::string& name) {
  return layer_norm(x, p[name + ".gamma"], p[name + ".beta"], static_cast<T>(kNormEps));
}
}  // namespace detail

/// Spatial channel adaptive modulation. `prefix` is e.g. "block.0.scam".
template <typename T>
Var<T> scam_forward(Var<T> x, const ParamBinding<T>& p, const std::string& prefix) {
  const Shape s = x.shape();
  if (s.c % 4 != 0) throw DimensionError("scam: channels of " + s.str() + " not divisible by 4");
  if (s.h % kPadMultiple != 0 || s.w % kPadMultiple != 0) {
    throw DimensionError("scam: spatial dims of " + s.str() + " not divisible by 8");
  }
  const Var<T> gate = detail::conv(global_avg_pool(detail::norm(x, p, prefix + ".norm")), p, prefix + ".channel");
  const Var<T> x1 = mul(x, gate);

  const auto groups = channel_split(x1, 4);
  const std::size_t q = s.c / 4;
  std::vector<Var<T>> branches;
  branches.push_back(detail::conv(groups[0], p, prefix + ".dw0", 1, q));
  for (std::size_t i = 1; i < 4; ++i) {
    const std::size_t rate = std::size_t{1} << i;
    const Var<T> pooled = max_pool(groups[i], rate);
    branches.push_back(nearest_upsample(detail::conv(pooled, p, prefix + ".dw" + std::to_string(i), 1, q), rate));
  }
  const Var<T> xc = detail::conv(concat(branches), p, prefix + ".fuse");
  return mul(xc, x1);
}

/// Channel fusion convolution. `prefix` is e.g. "block.0.cfc".
template <typename T>
Var<T> cfc_forward(Var<T> y, const ParamBinding<T>& p, const std::string& prefix) {
  const Var<T> y0 = detail::conv(detail::norm(y, p, prefix + ".norm"), p, prefix + ".expand", 1);
  const auto halves = channel_split(y0, 2);
  return detail::conv(mul(halves[0], halves[1]), p, prefix + ".fuse");
}

template <typename T>
Var<T> block_forward(Var<T> x, const ParamBinding<T>& p, std::size_t index, const ModelConfig& cfg) {
  const std::string b = "block." + std::to_string(index);
  Var<T> x1 = cfg.enable_scam ? add(x, scam_forward(x, p, b + ".scam")) : x;
  return cfg.enable_cfc ? add(x1, cfc_forward(x1, p, b + ".cfc")) : x1;
}

/// Global-local information extraction: (N, C, H, W) -> (N, 2C, H, W).
template <typename T>
Var<T> glie_forward(Var<T> z, const ParamBinding<T>& p, const std::string& prefix = "glie") {
  const Shape s = z.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) throw DimensionError("glie: spatial dims of " + s.str() + " must be even");
  const Var<T> zhat = concat(spatial_divide(z, 2));
  const Var<T> z1 = pixel_shuffle(detail::conv(zhat, p, prefix + ".fuse"), 2);
  return concat(std::vector<Var<T>>{z1, z});
}

/// Full network on LR images in [0, 1]. Inputs whose sides are not multiples
/// of 8 are reflect-padded on the bottom/right and the output cropped back.
/// The output is not clamped.
template <typename T>
Var<T> model_forward(Var<T> lr, const ParamBinding<T>& p, const ModelConfig& cfg) {
  cfg.validate();
  const Shape s = lr.shape();
  if (s.c != 3) throw DimensionError("model: expected 3-channel input, got " + s.str());
  const std::size_t ph = (s.h + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const std::size_t pw = (s.w + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const bool padded = ph != s.h || pw != s.w;
  Var<T> x = padded ? reflect_pad(lr, ph - s.h, pw - s.w) : lr;

  Var<T> f = detail::conv(x, p, "head", 1);
  for (std::size_t i = 0; i < cfg.blocks; ++i) f = block_forward(f, p, i, cfg);
  if (cfg.enable_glie) f = glie_forward(f, p);
  Var<T> sr = pixel_shuffle(detail::conv(f, p, "tail", 1), cfg.scale);
  return padded ? crop(sr, s.h * cfg.scale, s.w * cfg.scale) : sr;
}

/// Forward-only evaluation, clamped to [0, 1].
template <typename T>
Tensor<T> infer(const Tensor<T>& lr, const WeightStore<T>& weights, const ModelConfig& cfg) {
  validate_weights(weights, cfg);
  Graph<T> g;
  const auto p = bind_weights(g, weights, false);
  Tensor<T> out = model_forward(g.constant(lr), p, cfg).value();
  for (auto& v : out.data()) v = std::clamp(v, T(0), T(1));
  return out;
}

}  // namespace glsr
