// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "glsr/errors.hpp"
#include "glsr/graph.hpp"
#include "glsr/tensor.hpp"

namespace glsr {

struct GradCheckOptions {
  double eps = 1e-5;              // step, scaled by max(1, |theta|)
  std::size_t max_samples = 0;    // 0 checks every coordinate
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t samples = 0;
  std::size_t worst_leaf = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares reverse-mode gradients with central differences.
///
/// `f(graph, leaves)` must build a scalar from the given leaf Vars. Each
/// sampled coordinate contributes |a - n| / max(|a|, |n|, 1e-8).
template <typename F>
GradCheckResult grad_check(F&& f, std::vector<Tensor<double>> leaves, GradCheckOptions opt = {}) {
  auto evaluate = [&](bool with_grad, std::vector<Tensor<double>>* grads) {
    Graph<double> g;
    std::vector<Var<double>> vars;
    vars.reserve(leaves.size());
    for (const auto& t : leaves) vars.push_back(g.leaf(t, with_grad));
    Var<double> out = f(g, std::span<const Var<double>>(vars));
    if (out.value().size() != 1) throw UsageError("grad_check: function must return a scalar");
    const double v = out.value()[0];
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss");
    if (with_grad) {
      g.backward(out);
      for (const auto& var : vars) grads->push_back(g.grad(var));
    }
    return v;
  };

  std::vector<Tensor<double>> analytic;
  evaluate(true, &analytic);

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t l = 0; l < leaves.size(); ++l)
    for (std::size_t i = 0; i < leaves[l].size(); ++i) coords.emplace_back(l, i);
  if (opt.max_samples > 0 && coords.size() > opt.max_samples) {
    std::mt19937_64 rng(opt.seed);
    for (std::size_t i = 0; i < opt.max_samples; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (coords.size() - i));
      std::swap(coords[i], coords[j]);
    }
    coords.resize(opt.max_samples);
  }

  GradCheckResult res;
  for (auto [l, i] : coords) {
    const double theta = leaves[l][i];
    const double h = opt.eps * std::max(1.0, std::abs(theta));
    leaves[l][i] = theta + h;
    const double fp = evaluate(false, nullptr);
    leaves[l][i] = theta - h;
    const double fm = evaluate(false, nullptr);
    leaves[l][i] = theta;
    const double numeric = (fp - fm) / (2 * h);
    const double a = analytic[l][i];
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    ++res.samples;
    if (err > res.max_rel_error || res.samples == 1) {
      res.max_rel_error = std::max(res.max_rel_error, err);
      if (err >= res.max_rel_error) {
        res.worst_leaf = l;
        res.worst_index = i;
        res.worst_analytic = a;
        res.worst_numeric = numeric;
      }
    }
  }
  return res;
}

}  // namespace glsr
