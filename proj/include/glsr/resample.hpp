// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "glsr/errors.hpp"
#include "glsr/tensor.hpp"

namespace glsr {

/// Keys cubic convolution kernel with parameter a (a = -0.5 is Catmull-Rom).
inline double cubic_kernel(double x, double a = -0.5) {
  const double ax = std::abs(x);
  if (ax <= 1) return ((a + 2) * ax - (a + 3)) * ax * ax + 1;
  if (ax < 2) return ((a * ax - 5 * a) * ax + 8 * a) * ax - 4 * a;
  return 0;
}

struct ResampleTaps {
  std::vector<std::size_t> index;  // input sample per tap
  std::vector<double> weight;
};

namespace detail {
// Half-sample mirror: -1 -> 0, n -> n - 1.
inline std::size_t mirror(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - 1 - i;
  return static_cast<std::size_t>(i);
}
}  // namespace detail

/// Antialiased bicubic taps for shrinking `in_size` samples by an integer
/// factor: the kernel is stretched by `factor`, weights are normalized to sum
/// to one and out-of-range samples are mirrored.
inline std::vector<ResampleTaps> bicubic_taps(std::size_t in_size, std::size_t factor) {
  const std::size_t out_size = in_size / factor;
  const double s = static_cast<double>(factor);
  std::vector<ResampleTaps> taps(out_size);
  for (std::size_t o = 0; o < out_size; ++o) {
    const double center = (static_cast<double>(o) + 0.5) * s - 0.5;
    const auto first = static_cast<std::ptrdiff_t>(std::ceil(center - 2 * s));
    const auto last = static_cast<std::ptrdiff_t>(std::floor(center + 2 * s));
    double total = 0;
    for (std::ptrdiff_t j = first; j <= last; ++j) {
      const double wgt = cubic_kernel((center - static_cast<double>(j)) / s);
      if (wgt == 0) continue;
      taps[o].index.push_back(detail::mirror(j, in_size));
      taps[o].weight.push_back(wgt);
      total += wgt;
    }
    for (auto& wgt : taps[o].weight) wgt /= total;
  }
  return taps;
}

/// Separable bicubic reduction of every plane by `factor` (H, W divisible).
template <typename T>
Tensor<T> bicubic_downsample(const Tensor<T>& img, std::size_t factor) {
  const Shape s = img.shape();
  if (factor == 0 || s.h % factor != 0 || s.w % factor != 0) {
    throw DimensionError("bicubic_downsample: " + s.str() + " not divisible by " + std::to_string(factor));
  }
  const Shape os{s.n, s.c, s.h / factor, s.w / factor};
  const auto tx = bicubic_taps(s.w, factor);
  const auto ty = bicubic_taps(s.h, factor);
  Tensor<T> out(os);
  std::vector<double> rows(s.h * os.w);
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    const T* in = img.ptr() + nc * s.plane();
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < os.w; ++x) {
        double acc = 0;
        for (std::size_t k = 0; k < tx[x].index.size(); ++k) acc += tx[x].weight[k] * static_cast<double>(in[y * s.w + tx[x].index[k]]);
        rows[y * os.w + x] = acc;
      }
    T* o = out.ptr() + nc * os.plane();
    for (std::size_t y = 0; y < os.h; ++y)
      for (std::size_t x = 0; x < os.w; ++x) {
        double acc = 0;
        for (std::size_t k = 0; k < ty[y].index.size(); ++k) acc += ty[y].weight[k] * rows[ty[y].index[k] * os.w + x];
        o[y * os.w + x] = static_cast<T>(acc);
      }
  }
  return out;
}

}  // namespace glsr
