// SPDX-License-Identifier: Apache-2.0
#pragma once

// Luma-plane quality metrics. Y follows the BT.601 studio-swing convention
// used throughout SR evaluation: Y = 16 + (65.481 R + 128.553 G + 24.966 B) / 255
// for 8-bit R, G, B.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "glsr/errors.hpp"
#include "glsr/image.hpp"
#include "glsr/tensor.hpp"

namespace glsr {

struct YPlane {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  YPlane() = default;
  YPlane(std::size_t h, std::size_t w) : height(h), width(w), values(h * w, 0.0) {}
  double& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

inline double luma(double r, double g, double b) { return 16.0 + (65.481 * r + 128.553 * g + 24.966 * b) / 255.0; }

inline YPlane rgb_to_y(const ImageU8& img) {
  YPlane y(img.height, img.width);
  for (std::size_t r = 0; r < img.height; ++r)
    for (std::size_t c = 0; c < img.width; ++c) y.at(r, c) = luma(img.at(c, r, 0), img.at(c, r, 1), img.at(c, r, 2));
  return y;
}

/// Luma of batch element `n` of an RGB tensor in [0, 1]. With `quantize` the
/// values are first clamped and rounded to 8 bits as if written to disk.
template <typename T>
YPlane rgb_to_y(const Tensor<T>& t, std::size_t n = 0, bool quantize = false) {
  const Shape s = t.shape();
  if (s.c != 3 || n >= s.n) throw DimensionError("rgb_to_y: expected 3 channels, got " + s.str());
  YPlane y(s.h, s.w);
  for (std::size_t r = 0; r < s.h; ++r)
    for (std::size_t c = 0; c < s.w; ++c) {
      double rgb[3];
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double v = static_cast<double>(t(n, ch, r, c)) * 255.0;
        if (quantize) v = std::round(std::clamp(v, 0.0, 255.0));
        rgb[ch] = v;
      }
      y.at(r, c) = luma(rgb[0], rgb[1], rgb[2]);
    }
  return y;
}

/// Removes `border` pixels from every side.
inline YPlane crop_border(const YPlane& p, std::size_t border) {
  if (2 * border >= p.height || 2 * border >= p.width) {
    throw DimensionError("crop of " + std::to_string(border) + " leaves nothing of a " + std::to_string(p.height) + "x" +
                         std::to_string(p.width) + " plane");
  }
  YPlane out(p.height - 2 * border, p.width - 2 * border);
  for (std::size_t r = 0; r < out.height; ++r)
    for (std::size_t c = 0; c < out.width; ++c) out.at(r, c) = p.at(r + border, c + border);
  return out;
}

/// PSNR in dB with peak 255 after cropping `crop` border pixels.
/// Identical planes give +infinity.
inline double psnr(const YPlane& a, const YPlane& b, std::size_t crop = 0) {
  if (a.height != b.height || a.width != b.width) throw DimensionError("psnr: plane sizes differ");
  const YPlane ca = crop_border(a, crop);
  const YPlane cb = crop_border(b, crop);
  double se = 0;
  for (std::size_t i = 0; i < ca.values.size(); ++i) {
    const double d = ca.values[i] - cb.values[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(ca.values.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
inline std::vector<double> gaussian_taps(std::size_t size = kSsimWindow, double sigma = kSsimSigma) {
  std::vector<double> g(size);
  const double c = static_cast<double>(size - 1) / 2.0;
  double total = 0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-d * d / (2 * sigma * sigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

namespace detail {
// Valid-mode separable filtering of a plane.
inline std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                        const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  const std::size_t oh = h - k + 1, ow = w - k + 1;
  std::vector<double> tmp(h * ow, 0.0);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0;
      for (std::size_t i = 0; i < k; ++i) s += taps[i] * img[r * w + c + i];
      tmp[r * ow + c] = s;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0;
      for (std::size_t i = 0; i < k; ++i) s += taps[i] * tmp[(r + i) * ow + c];
      out[r * ow + c] = s;
    }
  return out;
}
}  // namespace detail

/// Mean SSIM over all 11x11 windows lying fully inside the plane (Gaussian
/// weights, sigma 1.5, C1 = (0.01 * 255)^2, C2 = (0.03 * 255)^2).
inline double ssim(const YPlane& a, const YPlane& b) {
  if (a.height != b.height || a.width != b.width) throw DimensionError("ssim: plane sizes differ");
  if (a.height < kSsimWindow || a.width < kSsimWindow) {
    throw DimensionError("ssim: plane smaller than the 11x11 window");
  }
  const double c1 = (0.01 * 255) * (0.01 * 255);
  const double c2 = (0.03 * 255) * (0.03 * 255);
  const std::size_t h = a.height, w = a.width;
  std::vector<double> aa(h * w), bb(h * w), ab(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    aa[i] = a.values[i] * a.values[i];
    bb[i] = b.values[i] * b.values[i];
    ab[i] = a.values[i] * b.values[i];
  }
  const auto taps = gaussian_taps();
  const auto mu_a = detail::filter_valid(a.values, h, w, taps);
  const auto mu_b = detail::filter_valid(b.values, h, w, taps);
  const auto e_aa = detail::filter_valid(aa, h, w, taps);
  const auto e_bb = detail::filter_valid(bb, h, w, taps);
  const auto e_ab = detail::filter_valid(ab, h, w, taps);
  double total = 0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    total += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

}  // namespace glsr
