// SPDX-License-Identifier: Apache-2.0
#pragma once

// Central-difference gradient checks for every differentiable building block,
// on small seeded double-precision problems. Shared by the `gradcheck` CLI
// command and the acceptance suite.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "glsr/grad_check.hpp"
#include "glsr/graph.hpp"
#include "glsr/loss.hpp"
#include "glsr/model.hpp"
#include "glsr/ops.hpp"
#include "glsr/random.hpp"

namespace glsr {

struct GradCheckCase {
  std::string name;
  double tolerance = 0;
  GradCheckResult result;
  bool passed() const { return result.max_rel_error < tolerance; }
};

// Smooth compositions are held to 1e-5; paths through max-pool argmax
// selection or |.| kinks to 1e-4.
inline constexpr double kSmoothTolerance = 1e-5;
inline constexpr double kKinkTolerance = 1e-4;

namespace detail {

inline Tensor<double> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(s);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// sum(v * r) with a fixed random r, so every output element gets a distinct weight.
inline Var<double> probe(Var<double> v, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(v, v.graph->constant(random_tensor(v.shape(), rng))));
}

// Randomized weights (not the zero-bias init) so every path carries signal.
inline WeightStore<double> random_weights(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  WeightStore<double> w;
  for (const auto& spec : layer_enumeration(cfg)) {
    Tensor<double> t(spec.shape());
    const bool gamma = spec.kind == ParamKind::norm_gamma;
    const double a = spec.kind == ParamKind::conv_weight ? std::sqrt(6.0 / static_cast<double>(spec.fan_in + spec.fan_out)) : 0.2;
    for (auto& v : t.data()) v = (gamma ? 1.0 : 0.0) + rng.uniform(-a, a);
    w.set(spec.path, std::move(t));
  }
  return w;
}

// Leaves = [input, then the weights whose path starts with `prefix`].
template <typename Build>
GradCheckResult check_module(const ModelConfig& cfg, const std::string& prefix, Shape input, Build build,
                             std::size_t max_samples, std::uint64_t seed) {
  Rng rng(seed);
  const WeightStore<double> weights = random_weights(cfg, seed + 1);
  std::vector<std::string> paths;
  std::vector<Tensor<double>> leaves{random_tensor(input, rng)};
  for (const auto& [path, t] : weights) {
    if (path.rfind(prefix, 0) == 0) {
      paths.push_back(path);
      leaves.push_back(t);
    }
  }
  auto f = [&](Graph<double>& g, std::span<const Var<double>> v) {
    ParamBinding<double> p;
    for (std::size_t i = 0; i < paths.size(); ++i) p.bind(paths[i], v[i + 1]);
    for (const auto& [path, t] : weights) {
      if (path.rfind(prefix, 0) != 0) p.bind(path, g.constant(t));
    }
    return build(g, v[0], p);
  };
  return grad_check(f, leaves, {1e-5, max_samples, seed + 2});
}

}  // namespace detail

inline GradCheckCase gradcheck_conv2d(std::uint64_t seed = 11) {
  Rng rng(seed);
  std::vector<Tensor<double>> leaves{detail::random_tensor({1, 4, 6, 6}, rng), detail::random_tensor({6, 2, 3, 3}, rng),
                                     detail::random_tensor({6, 1, 1, 1}, rng)};
  auto f = [&](Graph<double>&, std::span<const Var<double>> v) {
    // grouped, strided and padded in one go
    return detail::probe(conv2d(v[0], v[1], v[2], ConvOptions{2, 1, 2}), seed + 100);
  };
  return {"conv2d", kSmoothTolerance, grad_check(f, leaves, {1e-5, 0, seed})};
}

inline GradCheckCase gradcheck_layer_norm(std::uint64_t seed = 12) {
  Rng rng(seed);
  std::vector<Tensor<double>> leaves{detail::random_tensor({2, 8, 4, 4}, rng), detail::random_tensor({8, 1, 1, 1}, rng, 0.5, 1.5),
                                     detail::random_tensor({8, 1, 1, 1}, rng)};
  auto f = [&](Graph<double>&, std::span<const Var<double>> v) {
    return detail::probe(layer_norm(v[0], v[1], v[2], 1e-6), seed + 100);
  };
  return {"layer_norm", kSmoothTolerance, grad_check(f, leaves, {1e-5, 0, seed})};
}

inline GradCheckCase gradcheck_mul(std::uint64_t seed = 13) {
  Rng rng(seed);
  std::vector<Tensor<double>> leaves{detail::random_tensor({2, 3, 4, 4}, rng), detail::random_tensor({2, 3, 4, 4}, rng),
                                     detail::random_tensor({2, 3, 1, 1}, rng)};
  auto f = [&](Graph<double>&, std::span<const Var<double>> v) {
    return detail::probe(mul(mul(v[0], v[1]), v[2]), seed + 100);
  };
  return {"mul", kSmoothTolerance, grad_check(f, leaves, {1e-5, 0, seed})};
}

inline GradCheckCase gradcheck_scam(std::uint64_t seed = 21) {
  const ModelConfig cfg{8, 1, 2, true, true, true};
  auto r = detail::check_module(
      cfg, "block.0.scam", Shape{1, 8, 8, 8},
      [&](Graph<double>&, Var<double> x, const ParamBinding<double>& p) {
        return detail::probe(scam_forward(x, p, "block.0.scam"), seed + 100);
      },
      0, seed);
  return {"scam", kKinkTolerance, r};
}

inline GradCheckCase gradcheck_cfc(std::uint64_t seed = 22) {
  const ModelConfig cfg{8, 1, 2, true, true, true};
  auto r = detail::check_module(
      cfg, "block.0.cfc", Shape{2, 8, 4, 4},
      [&](Graph<double>&, Var<double> x, const ParamBinding<double>& p) {
        return detail::probe(cfc_forward(x, p, "block.0.cfc"), seed + 100);
      },
      0, seed);
  return {"cfc", kSmoothTolerance, r};
}

inline GradCheckCase gradcheck_block(std::uint64_t seed = 23) {
  const ModelConfig cfg{8, 1, 2, true, true, true};
  auto r = detail::check_module(
      cfg, "block.0", Shape{1, 8, 8, 8},
      [&](Graph<double>&, Var<double> x, const ParamBinding<double>& p) {
        return detail::probe(block_forward(x, p, 0, cfg), seed + 100);
      },
      0, seed);
  return {"block", kKinkTolerance, r};
}

inline GradCheckCase gradcheck_glie(std::uint64_t seed = 24) {
  const ModelConfig cfg{8, 1, 2, true, true, true};
  auto r = detail::check_module(
      cfg, "glie", Shape{1, 8, 8, 8},
      [&](Graph<double>&, Var<double> x, const ParamBinding<double>& p) {
        return detail::probe(glie_forward(x, p), seed + 100);
      },
      0, seed);
  return {"glie", kSmoothTolerance, r};
}

/// End-to-end: sr_loss(model(lr), hr) for C=8, N=1, s=2 on a 16x16 input,
/// over `samples` random coordinates of the input and all weights.
inline GradCheckCase gradcheck_model(std::size_t samples = 60, std::uint64_t seed = 31) {
  const ModelConfig cfg{8, 1, 2, true, true, true};
  Rng rng(seed);
  const Tensor<double> hr = detail::random_tensor({1, 3, 32, 32}, rng, 0.0, 1.0);
  auto r = detail::check_module(
      cfg, "", Shape{1, 3, 16, 16},
      [&](Graph<double>& g, Var<double> x, const ParamBinding<double>& p) {
        return sr_loss(model_forward(x, p, cfg), g.constant(hr), LossConfig{0.05});
      },
      samples, seed);
  return {"model", kKinkTolerance, r};
}

inline GradCheckCase gradcheck_loss(std::uint64_t seed = 41) {
  Rng rng(seed);
  std::vector<Tensor<double>> leaves{detail::random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0),
                                     detail::random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0)};
  auto f = [&](Graph<double>&, std::span<const Var<double>> v) { return sr_loss(v[0], v[1], LossConfig{0.05}); };
  return {"loss", kKinkTolerance, grad_check(f, leaves, {1e-5, 0, seed})};
}

/// Runs the checks selected by `module`: all, conv2d, layer_norm, mul, scam,
/// cfc, block, glie, model or loss.
inline std::vector<GradCheckCase> run_gradchecks(const std::string& module) {
  std::vector<GradCheckCase> out;
  const bool all = module == "all";
  bool matched = false;
  auto run = [&](const char* name, auto&& fn) {
    if (all || module == name) {
      out.push_back(fn());
      matched = true;
    }
  };
  run("conv2d", [] { return gradcheck_conv2d(); });
  run("layer_norm", [] { return gradcheck_layer_norm(); });
  run("mul", [] { return gradcheck_mul(); });
  run("scam", [] { return gradcheck_scam(); });
  run("cfc", [] { return gradcheck_cfc(); });
  run("block", [] { return gradcheck_block(); });
  run("glie", [] { return gradcheck_glie(); });
  run("model", [] { return gradcheck_model(); });
  run("loss", [] { return gradcheck_loss(); });
  if (!matched) throw UsageError("unknown gradcheck module '" + module + "'");
  return out;
}

}  // namespace glsr
