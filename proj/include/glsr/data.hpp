// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <numbers>
#include <utility>
#include <vector>

#include "glsr/errors.hpp"
#include "glsr/image.hpp"
#include "glsr/random.hpp"
#include "glsr/resample.hpp"
#include "glsr/tensor.hpp"

namespace glsr {

/// Procedural RGB images: a colour gradient, a rotated checkerboard patch at a
/// random period and phase inside a disk, and a few low-frequency waves.
/// Image i depends only on (seed, i).
inline std::vector<ImageU8> synth_dataset(std::uint64_t seed, std::size_t count, std::size_t size) {
  constexpr double two_pi = 2 * std::numbers::pi;
  std::vector<ImageU8> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(seed * 0x9E3779B97F4A7C15ULL + i + 1);
    const double n = static_cast<double>(size);

    double base[3], gx[3], gy[3];
    for (int c = 0; c < 3; ++c) {
      base[c] = rng.uniform(0.0, 1.0);
      gx[c] = rng.uniform(-1.0, 1.0);
      gy[c] = rng.uniform(-1.0, 1.0);
    }

    const double period = rng.uniform(6.0, 20.0);
    const double phase_u = rng.uniform(0.0, period), phase_v = rng.uniform(0.0, period);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double cs = std::cos(angle), sn = std::sin(angle);
    const double cx = rng.uniform(0.25, 0.75) * n, cy = rng.uniform(0.25, 0.75) * n;
    const double radius = rng.uniform(0.25, 0.5) * n;
    double amp[3];
    for (auto& a : amp) a = rng.uniform(-0.45, 0.45);

    struct Wave {
      double fx, fy, phase, amp[3];
    };
    std::vector<Wave> waves(6);
    for (auto& w : waves) {
      const double cycles = rng.uniform(1.0, 8.0);
      const double dir = rng.uniform(0.0, two_pi);
      w.fx = cycles * std::cos(dir) / n;
      w.fy = cycles * std::sin(dir) / n;
      w.phase = rng.uniform(0.0, two_pi);
      for (auto& a : w.amp) a = rng.uniform(-0.04, 0.04);
    }

    ImageU8 img(size, size);
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double fx = static_cast<double>(x), fy = static_cast<double>(y);
        const double u = cs * fx + sn * fy + phase_u, v = -sn * fx + cs * fy + phase_v;
        const bool inside = (fx - cx) * (fx - cx) + (fy - cy) * (fy - cy) < radius * radius;
        const double checker = (std::sin(two_pi * u / period) * std::sin(two_pi * v / period) >= 0) ? 1.0 : -1.0;
        for (int c = 0; c < 3; ++c) {
          double val = base[c] + gx[c] * (fx / n - 0.5) + gy[c] * (fy / n - 0.5);
          if (inside) val += amp[c] * checker;
          for (const auto& w : waves) val += w.amp[c] * std::sin(two_pi * (w.fx * fx + w.fy * fy) + w.phase);
          img.at(x, y, static_cast<std::size_t>(c)) = static_cast<std::uint8_t>(std::lround(std::clamp(val, 0.0, 1.0) * 255.0));
        }
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

struct PatchOptions {
  std::size_t patch_hr = 64;
  std::size_t batch = 8;
  std::size_t scale = 2;
  bool augment = true;  // random flips and 90-degree rotations
};

/// Random scale-aligned HR crops with the bicubic LR counterpart. The same
/// dihedral transform is applied to the HR crop before the LR is derived, so
/// LR and HR always agree.
template <typename T = float>
std::pair<Tensor<T>, Tensor<T>> sample_patches(const std::vector<ImageU8>& images, const PatchOptions& opt, Rng& rng) {
  const std::size_t p = opt.patch_hr, s = opt.scale;
  if (p == 0 || s == 0 || p % s != 0) throw ConfigError("sample_patches: patch size must be a positive multiple of the scale");
  std::vector<const ImageU8*> usable;
  for (const auto& img : images) {
    if (img.width >= p && img.height >= p) {
      usable.push_back(&img);
    } else {
      std::cerr << "warning: skipping " << img.width << "x" << img.height << " image smaller than patch " << p << "\n";
    }
  }
  if (usable.empty()) throw DimensionError("sample_patches: no image is at least " + std::to_string(p) + " pixels");

  Tensor<T> hr(Shape{opt.batch, 3, p, p});
  Tensor<T> lr(Shape{opt.batch, 3, p / s, p / s});
  Tensor<T> one(Shape{1, 3, p, p});
  for (std::size_t b = 0; b < opt.batch; ++b) {
    const ImageU8& img = *usable[rng.below(usable.size())];
    const std::size_t top = rng.below((img.height - p) / s + 1) * s;
    const std::size_t left = rng.below((img.width - p) / s + 1) * s;
    bool flip_x = false, flip_y = false, transpose = false;
    if (opt.augment) {
      flip_x = rng.coin();
      flip_y = rng.coin();
      transpose = rng.coin();
    }
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < p; ++y)
        for (std::size_t x = 0; x < p; ++x) {
          std::size_t sy = transpose ? x : y, sx = transpose ? y : x;
          if (flip_y) sy = p - 1 - sy;
          if (flip_x) sx = p - 1 - sx;
          one(0, c, y, x) = static_cast<T>(img.at(left + sx, top + sy, c)) / T(255);
        }
    const Tensor<T> small = bicubic_downsample(one, s);
    std::copy_n(one.ptr(), one.size(), hr.plane(b, 0));
    std::copy_n(small.ptr(), small.size(), lr.plane(b, 0));
  }
  return {std::move(lr), std::move(hr)};
}

}  // namespace glsr
