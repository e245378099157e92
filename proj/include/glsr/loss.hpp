// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "glsr/errors.hpp"
#include "glsr/fft.hpp"
#include "glsr/graph.hpp"
#include "glsr/tensor.hpp"

namespace glsr {

struct LossConfig {
  double gamma = 0.05;
};

/// Smoothing added under the square root of the spectral modulus when
/// forming its derivative, so the gradient stays bounded at zero difference.
inline constexpr double kModulusSmoothing = 1e-12;

/// L = mean|sr - hr| + gamma * mean_{n,c,u,v} |F(sr) - F(hr)|
///
/// F is the unnormalized 2-D DFT of each (n, c) plane and |.| the complex
/// modulus of the per-bin difference. Both means run over N*C*H*W terms.
template <typename T>
Var<T> sr_loss(Var<T> sr, Var<T> hr, const LossConfig& cfg = {}) {
  if (sr.graph != hr.graph) throw UsageError("sr_loss: operands belong to different graphs");
  const Shape s = sr.shape();
  if (s != hr.shape()) throw DimensionError("sr_loss: " + s.str() + " vs " + hr.shape().str());
  if (!(cfg.gamma >= 0)) throw ConfigError("sr_loss: gamma must be >= 0");
  const Tensor<T>& a = sr.value();
  const Tensor<T>& b = hr.value();
  if (!a.all_finite() || !b.all_finite()) throw NumericError("sr_loss: non-finite input");

  const std::size_t P = s.plane();
  const double count = static_cast<double>(s.size());
  std::vector<double> diff(s.size());
  double mae = 0;
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff[i] = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    mae += std::abs(diff[i]);
  }

  // Spectra of the difference are kept for the pullback.
  std::vector<ComplexPlane> spectra;
  double freq = 0;
  if (cfg.gamma > 0) {
    spectra.reserve(s.n * s.c);
    for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
      spectra.push_back(fft2d(std::span<const double>(diff.data() + nc * P, P), s.h, s.w));
      const ComplexPlane& d = spectra.back();
      for (std::size_t i = 0; i < P; ++i) freq += std::sqrt(d.re[i] * d.re[i] + d.im[i] * d.im[i]);
    }
  }
  Tensor<T> y(Shape{});
  y[0] = static_cast<T>(mae / count + cfg.gamma * freq / count);

  const int sid = sr.id, hid = hr.id;
  const double gamma = cfg.gamma;
  return sr.graph->record(
      std::move(y), {sid, hid},
      [=, diff = std::move(diff), spectra = std::move(spectra)](Graph<T>& gr, int self) {
        const double seed = static_cast<double>(gr.grad_buffer(self)[0]);
        std::vector<double> g(diff.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
          g[i] = (diff[i] > 0 ? 1.0 : diff[i] < 0 ? -1.0 : 0.0) / count;
        }
        if (gamma > 0) {
          // d|D|/dx = Re(fft(conj(D / |D|))) for D = fft(x).
          for (std::size_t nc = 0; nc < spectra.size(); ++nc) {
            const ComplexPlane& d = spectra[nc];
            ComplexPlane unit(d.h, d.w);
            for (std::size_t i = 0; i < P; ++i) {
              const double m = std::sqrt(d.re[i] * d.re[i] + d.im[i] * d.im[i] + kModulusSmoothing);
              unit.re[i] = d.re[i] / m;
              unit.im[i] = -d.im[i] / m;
            }
            const ComplexPlane back = fft2d(std::move(unit));
            for (std::size_t i = 0; i < P; ++i) g[nc * P + i] += gamma * back.re[i] / count;
          }
        }
        if (gr.requires_grad(sid)) {
          Tensor<T>& gs = gr.grad_buffer(sid);
          for (std::size_t i = 0; i < g.size(); ++i) gs[i] += static_cast<T>(seed * g[i]);
        }
        if (gr.requires_grad(hid)) {
          Tensor<T>& gh = gr.grad_buffer(hid);
          for (std::size_t i = 0; i < g.size(); ++i) gh[i] -= static_cast<T>(seed * g[i]);
        }
      });
}

}  // namespace glsr
