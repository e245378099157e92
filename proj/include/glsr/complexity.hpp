// SPDX-License-Identifier: Apache-2.0
#pragma once

// Parameter and multiply-accumulate accounting.
//
// Conventions:
//  - conv: params Cout*(Cin/groups)*k^2 + Cout, MACs OH*OW*Cout*(Cin/groups)*k^2
//    (bias adds are not counted);
//  - LayerNorm: 2C params;
//  - LayerNorm, pooling, gating products and residual adds cost one MAC per
//    element they read (reductions) or write (elementwise);
//  - split, concat, pixel (un)shuffle, nearest upsampling, padding and
//    cropping move data only and cost nothing.
// The trunk is costed at the size it actually runs at: the LR side
// ceil(HR / s) rounded up to a multiple of 8.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "glsr/errors.hpp"
#include "glsr/model.hpp"

namespace glsr {

struct LayerCost {
  std::string path;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

struct CostReport {
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  std::uint64_t flops = 0;  // 2 * macs
  std::size_t lr_height = 0;
  std::size_t lr_width = 0;
  std::vector<LayerCost> layers;
};

/// One convolution evaluated at an out_h x out_w output.
inline LayerCost conv_cost(const std::string& path, std::uint64_t cin, std::uint64_t cout, std::uint64_t k,
                           std::uint64_t out_h, std::uint64_t out_w, std::uint64_t groups = 1) {
  const std::uint64_t per = (cin / groups) * k * k;
  return {path, cout * per + cout, out_h * out_w * cout * per};
}

namespace detail {

class CostBuilder {
 public:
  void conv(const std::string& path, std::uint64_t cin, std::uint64_t cout, std::uint64_t k, std::uint64_t h,
            std::uint64_t w, std::uint64_t groups = 1) {
    layers_.push_back(conv_cost(path, cin, cout, k, h, w, groups));
  }
  void norm(const std::string& path, std::uint64_t c, std::uint64_t h, std::uint64_t w) { add(path, 2 * c, c * h * w); }
  void elementwise(const std::string& path, std::uint64_t elems) { add(path, 0, elems); }

  CostReport finish(std::size_t lr_h, std::size_t lr_w) {
    CostReport r;
    r.layers = std::move(layers_);
    for (const auto& l : r.layers) {
      r.params += l.params;
      r.macs += l.macs;
    }
    r.flops = 2 * r.macs;
    r.lr_height = lr_h;
    r.lr_width = lr_w;
    return r;
  }

 private:
  void add(const std::string& path, std::uint64_t params, std::uint64_t macs) { layers_.push_back({path, params, macs}); }
  std::vector<LayerCost> layers_;
};

inline CostReport cost_at_lr(const ModelConfig& cfg, std::uint64_t h, std::uint64_t w) {
  cfg.validate();
  const std::uint64_t C = cfg.channels;
  const std::uint64_t q = C / 4;
  const std::uint64_t hw = h * w;
  CostBuilder b;
  b.conv("head", 3, C, 3, h, w);
  for (std::size_t i = 0; i < cfg.blocks; ++i) {
    const std::string p = "block." + std::to_string(i);
    if (cfg.enable_scam) {
      b.norm(p + ".scam.norm", C, h, w);
      b.elementwise(p + ".scam.avgpool", C * hw);
      b.conv(p + ".scam.channel", C, C, 1, 1, 1);
      b.elementwise(p + ".scam.channel_gate", C * hw);
      b.conv(p + ".scam.dw0", q, q, 3, h, w, q);
      for (std::uint64_t g = 1; g < 4; ++g) {
        const std::uint64_t r = std::uint64_t{1} << g;
        b.elementwise(p + ".scam.maxpool" + std::to_string(g), q * hw);
        b.conv(p + ".scam.dw" + std::to_string(g), q, q, 3, h / r, w / r, q);
      }
      b.conv(p + ".scam.fuse", C, C, 1, h, w);
      b.elementwise(p + ".scam.spatial_gate", C * hw);
      b.elementwise(p + ".scam.residual", C * hw);
    }
    if (cfg.enable_cfc) {
      b.norm(p + ".cfc.norm", C, h, w);
      b.conv(p + ".cfc.expand", C, 2 * C, 3, h, w);
      b.elementwise(p + ".cfc.product", C * hw);
      b.conv(p + ".cfc.fuse", C, C, 1, h, w);
      b.elementwise(p + ".cfc.residual", C * hw);
    }
  }
  if (cfg.enable_glie) b.conv("glie.fuse", 4 * C, 4 * C, 1, h / 2, w / 2);
  b.conv("tail", cfg.enable_glie ? 2 * C : C, 3 * cfg.scale * cfg.scale, 3, h, w);
  return b.finish(h, w);
}

}  // namespace detail

/// Exact learnable scalar count of a configuration.
inline std::uint64_t count_params(const ModelConfig& cfg) {
  return detail::cost_at_lr(cfg, kPadMultiple, kPadMultiple).params;
}

/// Cost of super-resolving to an HR image of hr_height x hr_width.
inline CostReport count_flops(const ModelConfig& cfg, std::size_t hr_height, std::size_t hr_width) {
  if (hr_height == 0 || hr_width == 0) throw DimensionError("count_flops: HR size must be positive");
  cfg.validate();
  auto up = [](std::size_t v, std::size_t m) { return (v + m - 1) / m * m; };
  const std::size_t h = up(up(hr_height, cfg.scale) / cfg.scale, kPadMultiple);
  const std::size_t w = up(up(hr_width, cfg.scale) / cfg.scale, kPadMultiple);
  return detail::cost_at_lr(cfg, h, w);
}

}  // namespace glsr
