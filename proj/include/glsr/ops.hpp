// SPDX-License-Identifier: Apache-2.0
#pragma once

// Differentiable primitives over Graph<T>. Every op validates its operand
// shapes, computes the forward value and records the matching pullback.
//
// Reductions always run in a fixed order that does not depend on the data or
// on any threading, so repeated evaluation is bitwise reproducible.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "glsr/errors.hpp"
#include "glsr/graph.hpp"
#include "glsr/tensor.hpp"

namespace glsr {

namespace detail {

constexpr std::size_t kLanes = 16;

// Dot product with a fixed lane-striped summation order (vectorizable without
// reassociation, identical result on every run).
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += a[i + l] * b[i + l];
  }
  T tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  T s = 0;
  for (std::size_t l = 0; l < kLanes; ++l) s += acc[l];
  return s + tail;
}

template <typename T>
T sum(const T* a, std::size_t n) {
  T acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += a[i + l];
  }
  T tail = 0;
  for (; i < n; ++i) tail += a[i];
  T s = 0;
  for (std::size_t l = 0; l < kLanes; ++l) s += acc[l];
  return s + tail;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void add_into(const Tensor<T>& src, Tensor<T>& dst) {
  T* d = dst.ptr();
  const T* s = src.ptr();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

struct ConvGeometry {
  std::size_t cin_g, cout_g, k, stride, pad, h, w, oh, ow;
  std::size_t taps() const { return cin_g * k * k; }
  std::size_t out_plane() const { return oh * ow; }
  bool direct() const { return k == 1 && stride == 1 && pad == 0; }
};

// Unfold cin_g input planes into a (cin_g*k*k) x (oh*ow) patch matrix.
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const std::size_t p_out = g.out_plane();
  for (std::size_t ci = 0; ci < g.cin_g; ++ci) {
    const T* xp = x + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = col + ((ci * g.k + ky) * g.k + kx) * p_out;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                          static_cast<std::ptrdiff_t>(g.pad);
          T* out = row + oy * g.ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            for (std::size_t ox = 0; ox < g.ow; ++ox) out[ox] = T(0);
            continue;
          }
          const T* in = xp + static_cast<std::size_t>(iy) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                            static_cast<std::ptrdiff_t>(g.pad);
            out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w))
                          ? T(0)
                          : in[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add the patch matrix back onto the planes.
template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* dx) {
  const std::size_t p_out = g.out_plane();
  for (std::size_t ci = 0; ci < g.cin_g; ++ci) {
    T* xp = dx + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((ci * g.k + ky) * g.k + kx) * p_out;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                          static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* out = xp + static_cast<std::size_t>(iy) * g.w;
          const T* in = row + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) {
              out[static_cast<std::size_t>(ix)] += in[ox];
            }
          }
        }
      }
    }
  }
}

// out[i] = in[index[i]]; the pullback scatter-adds, so repeated indices are fine.
template <typename T>
Var<T> gather(Var<T> x, Shape out_shape, std::vector<std::uint32_t> index) {
  const Tensor<T>& xv = x.value();
  Tensor<T> y(out_shape);
  for (std::size_t i = 0; i < index.size(); ++i) y[i] = xv[index[i]];
  const int xid = x.id;
  return x.graph->record(std::move(y), {xid},
                         [xid, index = std::move(index)](Graph<T>& g, int self) {
                           const Tensor<T>& gy = g.grad_buffer(self);
                           if (!g.requires_grad(xid)) return;
                           Tensor<T>& gx = g.grad_buffer(xid);
                           for (std::size_t i = 0; i < index.size(); ++i) gx[index[i]] += gy[i];
                         });
}

inline void require_same_graph(const void* a, const void* b) {
  if (a != b) throw UsageError("operands belong to different graphs");
}

}  // namespace detail

struct ConvOptions {
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t groups = 1;
};

/// Grouped 2-D cross-correlation with zero padding.
///
/// x: (N, Cin, H, W), w: (Cout, Cin/groups, k, k), b: Cout values (any shape of
/// that size) or an invalid Var for no bias.
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, ConvOptions opt = {}) {
  Graph<T>& graph = *x.graph;
  detail::require_same_graph(x.graph, w.graph);
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  if (opt.groups == 0 || opt.stride == 0) throw ConfigError("conv2d: groups and stride must be positive");
  if (xs.c % opt.groups != 0 || ws.n % opt.groups != 0) {
    throw ConfigError("conv2d: channels (" + std::to_string(xs.c) + " in, " + std::to_string(ws.n) +
                      " out) not divisible by groups " + std::to_string(opt.groups));
  }
  if (ws.h != ws.w || ws.h % 2 == 0) throw DimensionError("conv2d: kernel must be square with odd size, got " + ws.str());
  if (ws.c != xs.c / opt.groups) {
    throw DimensionError("conv2d: weight " + ws.str() + " expects " + std::to_string(ws.c * opt.groups) +
                         " input channels, input is " + xs.str());
  }
  const bool has_bias = b.valid();
  if (has_bias) {
    detail::require_same_graph(x.graph, b.graph);
    if (b.value().size() != ws.n) throw DimensionError("conv2d: bias size does not match Cout " + std::to_string(ws.n));
  }
  if (xs.h + 2 * opt.pad < ws.h || xs.w + 2 * opt.pad < ws.w) {
    throw DimensionError("conv2d: kernel larger than padded input " + xs.str());
  }

  const detail::ConvGeometry geo{xs.c / opt.groups,
                                 ws.n / opt.groups,
                                 ws.h,
                                 opt.stride,
                                 opt.pad,
                                 xs.h,
                                 xs.w,
                                 (xs.h + 2 * opt.pad - ws.h) / opt.stride + 1,
                                 (xs.w + 2 * opt.pad - ws.w) / opt.stride + 1};
  const std::size_t taps = geo.taps();
  const std::size_t p_out = geo.out_plane();

  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  Tensor<T> y(Shape{xs.n, ws.n, geo.oh, geo.ow});
  std::vector<T> col(geo.direct() ? 0 : taps * p_out);
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t g = 0; g < opt.groups; ++g) {
      const T* xg = xv.plane(n, g * geo.cin_g);
      const T* cp = xg;
      if (!geo.direct()) {
        detail::im2col(xg, geo, col.data());
        cp = col.data();
      }
      for (std::size_t co = 0; co < geo.cout_g; ++co) {
        const std::size_t oc = g * geo.cout_g + co;
        T* out = y.plane(n, oc);
        const T* wrow = wv.ptr() + oc * taps;
        for (std::size_t r = 0; r < taps; ++r) detail::axpy(wrow[r], cp + r * p_out, out, p_out);
        if (has_bias) {
          const T bv = b.value()[oc];
          for (std::size_t p = 0; p < p_out; ++p) out[p] += bv;
        }
      }
    }
  }

  const int xid = x.id, wid = w.id, bid = has_bias ? b.id : -1;
  const std::size_t groups = opt.groups;
  return graph.record(std::move(y), has_bias ? std::vector<int>{xid, wid, bid} : std::vector<int>{xid, wid},
                      [=](Graph<T>& gr, int self) {
                        const Tensor<T>& gy = gr.grad_buffer(self);
                        const Tensor<T>& xval = gr.value(xid);
                        const Tensor<T>& wval = gr.value(wid);
                        const bool need_x = gr.requires_grad(xid);
                        const bool need_w = gr.requires_grad(wid);
                        const bool need_b = bid >= 0 && gr.requires_grad(bid);
                        T* gw = need_w ? gr.grad_buffer(wid).ptr() : nullptr;
                        T* gb = need_b ? gr.grad_buffer(bid).ptr() : nullptr;
                        T* gx = need_x ? gr.grad_buffer(xid).ptr() : nullptr;
                        std::vector<T> colb(geo.direct() ? 0 : taps * p_out);
                        std::vector<T> dcol(need_x && !geo.direct() ? taps * p_out : 0);
                        for (std::size_t n = 0; n < xs.n; ++n) {
                          for (std::size_t g = 0; g < groups; ++g) {
                            const T* xg = xval.plane(n, g * geo.cin_g);
                            const T* cp = xg;
                            if (need_w && !geo.direct()) {
                              detail::im2col(xg, geo, colb.data());
                              cp = colb.data();
                            }
                            T* dc = nullptr;
                            if (need_x) {
                              if (geo.direct()) {
                                dc = gx + (n * xs.c + g * geo.cin_g) * xs.plane();
                              } else {
                                std::fill(dcol.begin(), dcol.end(), T(0));
                                dc = dcol.data();
                              }
                            }
                            for (std::size_t co = 0; co < geo.cout_g; ++co) {
                              const std::size_t oc = g * geo.cout_g + co;
                              const T* gyp = gy.plane(n, oc);
                              if (need_w) {
                                T* gwrow = gw + oc * taps;
                                for (std::size_t r = 0; r < taps; ++r) gwrow[r] += detail::dot(gyp, cp + r * p_out, p_out);
                              }
                              if (need_b) gb[oc] += detail::sum(gyp, p_out);
                              if (need_x) {
                                const T* wrow = wval.ptr() + oc * taps;
                                for (std::size_t r = 0; r < taps; ++r) detail::axpy(wrow[r], gyp, dc + r * p_out, p_out);
                              }
                            }
                            if (need_x && !geo.direct()) {
                              detail::col2im(dcol.data(), geo, gx + (n * xs.c + g * geo.cin_g) * xs.plane());
                            }
                          }
                        }
                      });
}

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, ConvOptions opt = {}) {
  return conv2d(x, w, Var<T>{}, opt);
}

/// Normalizes the channel vector at every (n, h, w) to zero mean and unit
/// variance, then applies the per-channel affine map gamma * x + beta.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-6)) {
  const Shape s = x.shape();
  if (gamma.value().size() != s.c || beta.value().size() != s.c) {
    throw DimensionError("layer_norm: gamma/beta size must equal channels " + std::to_string(s.c));
  }
  if (!(eps > 0)) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t P = s.plane();
  const Tensor<T>& xv = x.value();
  const Tensor<T>& gv = gamma.value();
  const Tensor<T>& bv = beta.value();
  Tensor<T> y(s);
  Tensor<T> xhat(s);
  std::vector<T> rstd(s.n * P);
  std::vector<T> mean(P), var(P);
  const T inv_c = T(1) / static_cast<T>(s.c);
  for (std::size_t n = 0; n < s.n; ++n) {
    std::fill(mean.begin(), mean.end(), T(0));
    std::fill(var.begin(), var.end(), T(0));
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* xp = xv.plane(n, c);
      for (std::size_t p = 0; p < P; ++p) mean[p] += xp[p];
    }
    for (std::size_t p = 0; p < P; ++p) mean[p] *= inv_c;
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* xp = xv.plane(n, c);
      for (std::size_t p = 0; p < P; ++p) {
        const T d = xp[p] - mean[p];
        var[p] += d * d;
      }
    }
    T* rs = rstd.data() + n * P;
    for (std::size_t p = 0; p < P; ++p) rs[p] = T(1) / std::sqrt(var[p] * inv_c + eps);
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* xp = xv.plane(n, c);
      T* hp = xhat.plane(n, c);
      T* yp = y.plane(n, c);
      const T gc = gv[c], bc = bv[c];
      for (std::size_t p = 0; p < P; ++p) {
        hp[p] = (xp[p] - mean[p]) * rs[p];
        yp[p] = gc * hp[p] + bc;
      }
    }
  }
  const int xid = x.id, gid = gamma.id, bid = beta.id;
  return x.graph->record(
      std::move(y), {xid, gid, bid},
      [=, xhat = std::move(xhat), rstd = std::move(rstd)](Graph<T>& gr, int self) {
        const Tensor<T>& gy = gr.grad_buffer(self);
        const Tensor<T>& gv = gr.value(gid);
        if (gr.requires_grad(gid) || gr.requires_grad(bid)) {
          Tensor<T>* gg = gr.requires_grad(gid) ? &gr.grad_buffer(gid) : nullptr;
          Tensor<T>* gb = gr.requires_grad(bid) ? &gr.grad_buffer(bid) : nullptr;
          for (std::size_t n = 0; n < s.n; ++n) {
            for (std::size_t c = 0; c < s.c; ++c) {
              if (gg) (*gg)[c] += detail::dot(gy.plane(n, c), xhat.plane(n, c), P);
              if (gb) (*gb)[c] += detail::sum(gy.plane(n, c), P);
            }
          }
        }
        if (!gr.requires_grad(xid)) return;
        Tensor<T>& gx = gr.grad_buffer(xid);
        std::vector<T> m1(P), m2(P);
        const T inv_c = T(1) / static_cast<T>(s.c);
        for (std::size_t n = 0; n < s.n; ++n) {
          std::fill(m1.begin(), m1.end(), T(0));
          std::fill(m2.begin(), m2.end(), T(0));
          for (std::size_t c = 0; c < s.c; ++c) {
            const T* gyp = gy.plane(n, c);
            const T* hp = xhat.plane(n, c);
            const T gc = gv[c];
            for (std::size_t p = 0; p < P; ++p) {
              const T d = gyp[p] * gc;
              m1[p] += d;
              m2[p] += d * hp[p];
            }
          }
          const T* rs = rstd.data() + n * P;
          for (std::size_t c = 0; c < s.c; ++c) {
            const T* gyp = gy.plane(n, c);
            const T* hp = xhat.plane(n, c);
            T* gxp = gx.plane(n, c);
            const T gc = gv[c];
            for (std::size_t p = 0; p < P; ++p) {
              gxp[p] += rs[p] * (gyp[p] * gc - m1[p] * inv_c - hp[p] * m2[p] * inv_c);
            }
          }
        }
      });
}

/// Spatial mean of every channel: (N, C, H, W) -> (N, C, 1, 1).
template <typename T>
Var<T> global_avg_pool(Var<T> x) {
  const Shape s = x.shape();
  const std::size_t P = s.plane();
  const Tensor<T>& xv = x.value();
  Tensor<T> y(Shape{s.n, s.c, 1, 1});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) y(n, c, 0, 0) = detail::sum(xv.plane(n, c), P) / static_cast<T>(P);
  }
  const int xid = x.id;
  return x.graph->record(std::move(y), {xid}, [=](Graph<T>& gr, int self) {
    if (!gr.requires_grad(xid)) return;
    const Tensor<T>& gy = gr.grad_buffer(self);
    Tensor<T>& gx = gr.grad_buffer(xid);
    for (std::size_t n = 0; n < s.n; ++n) {
      for (std::size_t c = 0; c < s.c; ++c) {
        const T v = gy(n, c, 0, 0) / static_cast<T>(P);
        T* gxp = gx.plane(n, c);
        for (std::size_t p = 0; p < P; ++p) gxp[p] += v;
      }
    }
  });
}

/// k x k max pooling with stride k. Ties resolve to the first maximum in scan order.
template <typename T>
Var<T> max_pool(Var<T> x, std::size_t k) {
  const Shape s = x.shape();
  if (k == 0 || s.h % k != 0 || s.w % k != 0) {
    throw DimensionError("max_pool: spatial dims of " + s.str() + " not divisible by " + std::to_string(k));
  }
  const Shape os{s.n, s.c, s.h / k, s.w / k};
  const Tensor<T>& xv = x.value();
  Tensor<T> y(os);
  std::vector<std::uint32_t> arg(os.size());
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    const std::size_t base = nc * s.plane();
    for (std::size_t oy = 0; oy < os.h; ++oy) {
      for (std::size_t ox = 0; ox < os.w; ++ox, ++o) {
        std::size_t best = base + oy * k * s.w + ox * k;
        for (std::size_t dy = 0; dy < k; ++dy) {
          for (std::size_t dx = 0; dx < k; ++dx) {
            const std::size_t idx = base + (oy * k + dy) * s.w + ox * k + dx;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        y[o] = xv[best];
        arg[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  const int xid = x.id;
  return x.graph->record(std::move(y), {xid}, [xid, arg = std::move(arg)](Graph<T>& gr, int self) {
    if (!gr.requires_grad(xid)) return;
    const Tensor<T>& gy = gr.grad_buffer(self);
    Tensor<T>& gx = gr.grad_buffer(xid);
    for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += gy[i];
  });
}

/// Nearest-neighbour upsampling by an integer factor r.
template <typename T>
Var<T> nearest_upsample(Var<T> x, std::size_t r) {
  if (r == 0) throw ConfigError("nearest_upsample: factor must be >= 1");
  const Shape s = x.shape();
  const Shape os{s.n, s.c, s.h * r, s.w * r};
  const Tensor<T>& xv = x.value();
  Tensor<T> y(os);
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    const T* in = xv.ptr() + nc * s.plane();
    T* out = y.ptr() + nc * os.plane();
    for (std::size_t oy = 0; oy < os.h; ++oy) {
      const T* row = in + (oy / r) * s.w;
      for (std::size_t ox = 0; ox < os.w; ++ox) out[oy * os.w + ox] = row[ox / r];
    }
  }
  const int xid = x.id;
  return x.graph->record(std::move(y), {xid}, [=](Graph<T>& gr, int self) {
    if (!gr.requires_grad(xid)) return;
    const Tensor<T>& gy = gr.grad_buffer(self);
    Tensor<T>& gx = gr.grad_buffer(xid);
    for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
      const T* out = gy.ptr() + nc * os.plane();
      T* in = gx.ptr() + nc * s.plane();
      for (std::size_t oy = 0; oy < os.h; ++oy) {
        T* row = in + (oy / r) * s.w;
        for (std::size_t ox = 0; ox < os.w; ++ox) row[ox / r] += out[oy * os.w + ox];
      }
    }
  });
}

/// (N, C, H, W) -> (N, C/r^2, H*r, W*r) with
/// out(c, h*r + dy, w*r + dx) = in(c*r^2 + dy*r + dx, h, w).
template <typename T>
Var<T> pixel_shuffle(Var<T> x, std::size_t r) {
  const Shape s = x.shape();
  if (r == 0 || s.c % (r * r) != 0) {
    throw DimensionError("pixel_shuffle: channels of " + s.str() + " not divisible by r^2 = " + std::to_string(r * r));
  }
  const Shape os{s.n, s.c / (r * r), s.h * r, s.w * r};
  std::vector<std::uint32_t> idx(os.size());
  std::size_t o = 0;
  for (std::size_t n = 0; n < os.n; ++n)
    for (std::size_t c = 0; c < os.c; ++c)
      for (std::size_t y = 0; y < os.h; ++y)
        for (std::size_t xw = 0; xw < os.w; ++xw, ++o) {
          const std::size_t ic = c * r * r + (y % r) * r + (xw % r);
          idx[o] = static_cast<std::uint32_t>(((n * s.c + ic) * s.h + y / r) * s.w + xw / r);
        }
  return detail::gather(x, os, std::move(idx));
}

/// Exact inverse of pixel_shuffle.
template <typename T>
Var<T> pixel_unshuffle(Var<T> x, std::size_t r) {
  const Shape s = x.shape();
  if (r == 0 || s.h % r != 0 || s.w % r != 0) {
    throw DimensionError("pixel_unshuffle: spatial dims of " + s.str() + " not divisible by " + std::to_string(r));
  }
  const Shape os{s.n, s.c * r * r, s.h / r, s.w / r};
  std::vector<std::uint32_t> idx(os.size());
  std::size_t o = 0;
  for (std::size_t n = 0; n < os.n; ++n)
    for (std::size_t oc = 0; oc < os.c; ++oc)
      for (std::size_t y = 0; y < os.h; ++y)
        for (std::size_t xw = 0; xw < os.w; ++xw, ++o) {
          const std::size_t c = oc / (r * r), dy = (oc % (r * r)) / r, dx = oc % r;
          idx[o] = static_cast<std::uint32_t>(((n * s.c + c) * s.h + y * r + dy) * s.w + xw * r + dx);
        }
  return detail::gather(x, os, std::move(idx));
}

/// Splits the plane into r*r phase sub-maps: sub-map dy*r + dx holds
/// x(2h + dy, 2w + dx) for r = 2. Each keeps all channels.
template <typename T>
std::vector<Var<T>> spatial_divide(Var<T> x, std::size_t r = 2) {
  const Shape s = x.shape();
  if (r == 0 || s.h % r != 0 || s.w % r != 0) {
    throw DimensionError("spatial_divide: spatial dims of " + s.str() + " not divisible by " + std::to_string(r));
  }
  const Shape os{s.n, s.c, s.h / r, s.w / r};
  std::vector<Var<T>> parts;
  for (std::size_t dy = 0; dy < r; ++dy) {
    for (std::size_t dx = 0; dx < r; ++dx) {
      std::vector<std::uint32_t> idx(os.size());
      std::size_t o = 0;
      for (std::size_t nc = 0; nc < s.n * s.c; ++nc)
        for (std::size_t y = 0; y < os.h; ++y)
          for (std::size_t xw = 0; xw < os.w; ++xw, ++o)
            idx[o] = static_cast<std::uint32_t>(nc * s.plane() + (y * r + dy) * s.w + xw * r + dx);
      parts.push_back(detail::gather(x, os, std::move(idx)));
    }
  }
  return parts;
}

/// Contiguous channel blocks, in order.
template <typename T>
std::vector<Var<T>> channel_split(Var<T> x, std::size_t parts) {
  const Shape s = x.shape();
  if (parts == 0 || s.c % parts != 0) {
    throw DimensionError("channel_split: channels of " + s.str() + " not divisible by " + std::to_string(parts));
  }
  const std::size_t cp = s.c / parts;
  const Shape os{s.n, cp, s.h, s.w};
  std::vector<Var<T>> out;
  for (std::size_t part = 0; part < parts; ++part) {
    const Tensor<T>& xv = x.value();
    Tensor<T> y(os);
    for (std::size_t n = 0; n < s.n; ++n) {
      std::copy_n(xv.plane(n, part * cp), cp * s.plane(), y.plane(n, 0));
    }
    const int xid = x.id;
    out.push_back(x.graph->record(std::move(y), {xid}, [=](Graph<T>& gr, int self) {
      if (!gr.requires_grad(xid)) return;
      const Tensor<T>& gy = gr.grad_buffer(self);
      Tensor<T>& gx = gr.grad_buffer(xid);
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* src = gy.plane(n, 0);
        T* dst = gx.plane(n, part * cp);
        for (std::size_t i = 0; i < cp * s.plane(); ++i) dst[i] += src[i];
      }
    }));
  }
  return out;
}

/// Channel-axis concatenation; inputs must agree on N, H, W.
template <typename T>
Var<T> concat(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw DimensionError("concat: no inputs");
  const Shape s0 = xs.front().shape();
  std::size_t total_c = 0;
  std::vector<int> ids;
  std::vector<std::size_t> chans;
  for (const auto& v : xs) {
    detail::require_same_graph(xs.front().graph, v.graph);
    const Shape s = v.shape();
    if (s.n != s0.n || s.h != s0.h || s.w != s0.w) {
      throw DimensionError("concat: " + s.str() + " incompatible with " + s0.str());
    }
    total_c += s.c;
    ids.push_back(v.id);
    chans.push_back(s.c);
  }
  const Shape os{s0.n, total_c, s0.h, s0.w};
  Tensor<T> y(os);
  std::size_t off = 0;
  for (const auto& v : xs) {
    const Tensor<T>& xv = v.value();
    for (std::size_t n = 0; n < s0.n; ++n) {
      std::copy_n(xv.plane(n, 0), xv.shape().c * s0.plane(), y.plane(n, off));
    }
    off += xv.shape().c;
  }
  return xs.front().graph->record(std::move(y), ids, [=](Graph<T>& gr, int self) {
    const Tensor<T>& gy = gr.grad_buffer(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (gr.requires_grad(ids[k])) {
        Tensor<T>& gx = gr.grad_buffer(ids[k]);
        for (std::size_t n = 0; n < os.n; ++n) {
          const T* src = gy.plane(n, off);
          T* dst = gx.plane(n, 0);
          for (std::size_t i = 0; i < chans[k] * os.plane(); ++i) dst[i] += src[i];
        }
      }
      off += chans[k];
    }
  });
}

/// Elementwise product. `b` may also be (N, C, 1, 1), broadcast over H and W.
template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::require_same_graph(a.graph, b.graph);
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  const bool bcast = sb != sa;
  if (bcast && !(sb.n == sa.n && sb.c == sa.c && sb.h == 1 && sb.w == 1)) {
    throw DimensionError("mul: " + sb.str() + " does not broadcast to " + sa.str());
  }
  const std::size_t P = sa.plane();
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> y(sa);
  if (bcast) {
    for (std::size_t nc = 0; nc < sa.n * sa.c; ++nc) {
      const T s = bv[nc];
      for (std::size_t p = 0; p < P; ++p) y[nc * P + p] = av[nc * P + p] * s;
    }
  } else {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  }
  const int aid = a.id, bid = b.id;
  return a.graph->record(std::move(y), {aid, bid}, [=](Graph<T>& gr, int self) {
    const Tensor<T>& gy = gr.grad_buffer(self);
    const Tensor<T>& av = gr.value(aid);
    const Tensor<T>& bv = gr.value(bid);
    if (gr.requires_grad(aid)) {
      Tensor<T>& ga = gr.grad_buffer(aid);
      if (bcast) {
        for (std::size_t nc = 0; nc < sa.n * sa.c; ++nc)
          for (std::size_t p = 0; p < P; ++p) ga[nc * P + p] += gy[nc * P + p] * bv[nc];
      } else {
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * bv[i];
      }
    }
    if (gr.requires_grad(bid)) {
      Tensor<T>& gb = gr.grad_buffer(bid);
      if (bcast) {
        for (std::size_t nc = 0; nc < sa.n * sa.c; ++nc) gb[nc] += detail::dot(gy.ptr() + nc * P, av.ptr() + nc * P, P);
      } else {
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i] * av[i];
      }
    }
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::require_same_graph(a.graph, b.graph);
  if (a.shape() != b.shape()) throw DimensionError("add: " + a.shape().str() + " vs " + b.shape().str());
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  const int aid = a.id, bid = b.id;
  return a.graph->record(std::move(y), {aid, bid}, [=](Graph<T>& gr, int self) {
    const Tensor<T>& gy = gr.grad_buffer(self);
    if (gr.requires_grad(aid)) detail::add_into(gy, gr.grad_buffer(aid));
    if (gr.requires_grad(bid)) detail::add_into(gy, gr.grad_buffer(bid));
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  detail::require_same_graph(a.graph, b.graph);
  if (a.shape() != b.shape()) throw DimensionError("sub: " + a.shape().str() + " vs " + b.shape().str());
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  const int aid = a.id, bid = b.id;
  return a.graph->record(std::move(y), {aid, bid}, [=](Graph<T>& gr, int self) {
    const Tensor<T>& gy = gr.grad_buffer(self);
    if (gr.requires_grad(aid)) detail::add_into(gy, gr.grad_buffer(aid));
    if (gr.requires_grad(bid)) {
      Tensor<T>& gb = gr.grad_buffer(bid);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= gy[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
  const Tensor<T>& av = a.value();
  Tensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * s;
  const int aid = a.id;
  return a.graph->record(std::move(y), {aid}, [=](Graph<T>& gr, int self) {
    if (!gr.requires_grad(aid)) return;
    const Tensor<T>& gy = gr.grad_buffer(self);
    Tensor<T>& ga = gr.grad_buffer(aid);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * s;
  });
}

/// Sum of all elements, as a (1, 1, 1, 1) tensor.
template <typename T>
Var<T> sum(Var<T> a) {
  const Tensor<T>& av = a.value();
  Tensor<T> y(Shape{});
  y[0] = detail::sum(av.ptr(), av.size());
  const int aid = a.id;
  return a.graph->record(std::move(y), {aid}, [=](Graph<T>& gr, int self) {
    if (!gr.requires_grad(aid)) return;
    const T g = gr.grad_buffer(self)[0];
    Tensor<T>& ga = gr.grad_buffer(aid);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

template <typename T>
Var<T> mean(Var<T> a) {
  return scale(sum(a), T(1) / static_cast<T>(a.value().size()));
}

namespace detail {
// Mirror index without repeating the edge sample (period 2n - 2).
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * n - 2);
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}
}  // namespace detail

/// Extends the bottom and right borders by mirror reflection.
template <typename T>
Var<T> reflect_pad(Var<T> x, std::size_t bottom, std::size_t right) {
  const Shape s = x.shape();
  const Shape os{s.n, s.c, s.h + bottom, s.w + right};
  std::vector<std::uint32_t> idx(os.size());
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc)
    for (std::size_t y = 0; y < os.h; ++y)
      for (std::size_t xw = 0; xw < os.w; ++xw, ++o) {
        const std::size_t iy = detail::reflect_index(static_cast<std::ptrdiff_t>(y), s.h);
        const std::size_t ix = detail::reflect_index(static_cast<std::ptrdiff_t>(xw), s.w);
        idx[o] = static_cast<std::uint32_t>(nc * s.plane() + iy * s.w + ix);
      }
  return detail::gather(x, os, std::move(idx));
}

/// Top-left h x w window.
template <typename T>
Var<T> crop(Var<T> x, std::size_t h, std::size_t w) {
  const Shape s = x.shape();
  if (h == 0 || w == 0 || h > s.h || w > s.w) {
    throw DimensionError("crop: " + std::to_string(h) + "x" + std::to_string(w) + " outside " + s.str());
  }
  const Shape os{s.n, s.c, h, w};
  std::vector<std::uint32_t> idx(os.size());
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xw = 0; xw < w; ++xw, ++o) idx[o] = static_cast<std::uint32_t>(nc * s.plane() + y * s.w + xw);
  return detail::gather(x, os, std::move(idx));
}

}  // namespace glsr
