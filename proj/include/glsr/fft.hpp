// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "glsr/errors.hpp"

namespace glsr {

/// H x W complex field in split re/im storage, row-major.
struct ComplexPlane {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<double> re;
  std::vector<double> im;

  ComplexPlane() = default;
  ComplexPlane(std::size_t h, std::size_t w) : h(h), w(w), re(h * w, 0.0), im(h * w, 0.0) {}
  std::size_t size() const { return h * w; }
};

enum class FftPath {
  automatic,  // radix-2 on power-of-two axes, direct DFT on the others
  direct,     // direct O(n^2) DFT on every axis
};

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place 1-D transform of n strided samples. sign = -1 forward, +1 inverse
// (unnormalized in both directions).
class Fft1d {
 public:
  Fft1d(std::size_t n, int sign, FftPath path)
      : n_(n), radix2_(path == FftPath::automatic && is_pow2(n)), cos_(n), sin_(n), buf_re_(n), buf_im_(n) {
    for (std::size_t k = 0; k < n; ++k) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      cos_[k] = std::cos(a);
      sin_[k] = sign * std::sin(a);
    }
  }

  void operator()(double* re, double* im, std::size_t stride) {
    for (std::size_t i = 0; i < n_; ++i) {
      buf_re_[i] = re[i * stride];
      buf_im_[i] = im[i * stride];
    }
    if (radix2_) {
      radix2();
      for (std::size_t i = 0; i < n_; ++i) {
        re[i * stride] = buf_re_[i];
        im[i * stride] = buf_im_[i];
      }
      return;
    }
    for (std::size_t k = 0; k < n_; ++k) {
      double sr = 0, si = 0;
      for (std::size_t j = 0; j < n_; ++j) {
        const std::size_t t = (k * j) % n_;
        sr += buf_re_[j] * cos_[t] - buf_im_[j] * sin_[t];
        si += buf_re_[j] * sin_[t] + buf_im_[j] * cos_[t];
      }
      re[k * stride] = sr;
      im[k * stride] = si;
    }
  }

 private:
  void radix2() {
    double* re = buf_re_.data();
    double* im = buf_im_.data();
    for (std::size_t i = 1, j = 0; i < n_; ++i) {
      std::size_t bit = n_ >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) {
        std::swap(re[i], re[j]);
        std::swap(im[i], im[j]);
      }
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t step = n_ / len;
      for (std::size_t i = 0; i < n_; i += len) {
        for (std::size_t k = 0; k < len / 2; ++k) {
          const double wr = cos_[k * step], wi = sin_[k * step];
          const std::size_t a = i + k, b = i + k + len / 2;
          const double tr = re[b] * wr - im[b] * wi;
          const double ti = re[b] * wi + im[b] * wr;
          re[b] = re[a] - tr;
          im[b] = im[a] - ti;
          re[a] += tr;
          im[a] += ti;
        }
      }
    }
  }

  std::size_t n_;
  bool radix2_;
  std::vector<double> cos_, sin_, buf_re_, buf_im_;
};

inline void transform2d(ComplexPlane& p, int sign, FftPath path) {
  if (p.h == 0 || p.w == 0) return;
  Fft1d rows(p.w, sign, path);
  for (std::size_t y = 0; y < p.h; ++y) rows(p.re.data() + y * p.w, p.im.data() + y * p.w, 1);
  Fft1d cols(p.h, sign, path);
  for (std::size_t x = 0; x < p.w; ++x) cols(p.re.data() + x, p.im.data() + x, p.w);
}

}  // namespace detail

/// Unnormalized forward transform X[u,v] = sum x[h,w] exp(-2 pi i (uh/H + vw/W)).
inline ComplexPlane fft2d(ComplexPlane p, FftPath path = FftPath::automatic) {
  detail::transform2d(p, -1, path);
  return p;
}

template <typename T>
ComplexPlane fft2d(std::span<const T> plane, std::size_t h, std::size_t w, FftPath path = FftPath::automatic) {
  if (plane.size() != h * w) throw DimensionError("fft2d: plane length does not match " + std::to_string(h) + "x" + std::to_string(w));
  ComplexPlane p(h, w);
  for (std::size_t i = 0; i < plane.size(); ++i) p.re[i] = static_cast<double>(plane[i]);
  return fft2d(std::move(p), path);
}

/// Inverse transform including the 1/(H*W) factor.
inline ComplexPlane ifft2d(ComplexPlane p, FftPath path = FftPath::automatic) {
  detail::transform2d(p, +1, path);
  const double inv = 1.0 / static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p.re[i] *= inv;
    p.im[i] *= inv;
  }
  return p;
}

/// Real part of ifft2d, for transforms of real planes.
inline std::vector<double> ifft2d_real(ComplexPlane p, FftPath path = FftPath::automatic) {
  return ifft2d(std::move(p), path).re;
}

}  // namespace glsr
