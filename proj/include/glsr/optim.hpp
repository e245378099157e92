// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "glsr/errors.hpp"
#include "glsr/model.hpp"
#include "glsr/tensor.hpp"

namespace glsr {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

/// First/second moment buffers mirroring a WeightStore, plus the step count.
template <typename T>
struct AdamState {
  std::map<std::string, std::vector<T>> m;
  std::map<std::string, std::vector<T>> v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
/// All gradients are checked before anything is modified; a non-finite
/// gradient aborts the step with NumericError and leaves weights and state
/// untouched.
template <typename T>
void adam_step(WeightStore<T>& weights, const std::map<std::string, Tensor<T>>& grads, AdamState<T>& state, double lr,
               const AdamOptions& opt = {}) {
  if (!(lr > 0)) throw ConfigError("adam_step: learning rate must be positive");
  for (const auto& [path, w] : weights) {
    auto it = grads.find(path);
    if (it == grads.end()) throw StructuralError("adam_step: no gradient for " + path);
    if (it->second.shape() != w.shape()) throw DimensionError("adam_step: gradient shape mismatch for " + path);
    if (!it->second.all_finite()) throw NumericError("adam_step: non-finite gradient for " + path);
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1 - std::pow(opt.beta1, t);
  const double bc2 = 1 - std::pow(opt.beta2, t);
  for (auto& [path, w] : weights) {
    const Tensor<T>& g = grads.at(path);
    auto& m = state.m[path];
    auto& v = state.v[path];
    if (m.empty()) {
      m.assign(w.size(), T(0));
      v.assign(w.size(), T(0));
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = opt.beta1 * static_cast<double>(m[i]) + (1 - opt.beta1) * gi;
      const double vi = opt.beta2 * static_cast<double>(v[i]) + (1 - opt.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + opt.eps);
      w[i] = static_cast<T>(static_cast<double>(w[i]) - update);
    }
  }
}

enum class Schedule { cosine, step };

struct LrSchedule {
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  std::size_t total_steps = 1;
  Schedule kind = Schedule::cosine;
  // Step decay only: multiply by `decay` every `interval` steps, floored at lr_end.
  std::size_t interval = 0;
  double decay = 0.5;
};

/// Learning rate at `step` in [0, total_steps]. Cosine annealing hits
/// lr_start at 0 and lr_end at total_steps exactly.
inline double lr_at(std::size_t step, const LrSchedule& s) {
  if (step > s.total_steps) throw ConfigError("lr_at: step beyond total_steps");
  if (s.kind == Schedule::step) {
    if (s.interval == 0) return s.lr_start;
    const double lr = s.lr_start * std::pow(s.decay, static_cast<double>(step / s.interval));
    return std::max(lr, s.lr_end);
  }
  if (step == 0) return s.lr_start;
  if (step == s.total_steps) return s.lr_end;
  const double frac = static_cast<double>(step) / static_cast<double>(s.total_steps);
  return s.lr_end + 0.5 * (s.lr_start - s.lr_end) * (1 + std::cos(std::numbers::pi * frac));
}

}  // namespace glsr
