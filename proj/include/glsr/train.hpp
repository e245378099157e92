// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <ostream>
#include <string>
#include <vector>

#include "glsr/checkpoint.hpp"
#include "glsr/data.hpp"
#include "glsr/errors.hpp"
#include "glsr/graph.hpp"
#include "glsr/image.hpp"
#include "glsr/loss.hpp"
#include "glsr/metrics.hpp"
#include "glsr/model.hpp"
#include "glsr/optim.hpp"
#include "glsr/resample.hpp"

namespace glsr {

struct TrainConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  Schedule schedule = Schedule::cosine;
  std::size_t step_interval = 0;
  double step_decay = 0.5;
  std::size_t total_steps = 1500;
  std::size_t batch = 8;
  std::size_t lr_patch = 32;  // HR patch is lr_patch * scale
  double gamma = 0.05;
  std::uint64_t seed = 0;
  std::size_t eval_interval = 0;  // 0: evaluate only after the last step
  bool augment = true;
  std::string checkpoint_path;    // receives the last good weights on a numeric failure

  std::size_t patch_hr(const ModelConfig& m) const { return lr_patch * m.scale; }

  void validate() const {
    if (total_steps == 0 || batch == 0) throw ConfigError("train: steps and batch must be positive");
    if (lr_patch == 0 || lr_patch % kPadMultiple != 0) {
      throw ConfigError("train: LR patch must be a positive multiple of 8, got " + std::to_string(lr_patch));
    }
    if (!(lr_end > 0) || lr_start < lr_end) throw ConfigError("train: need lr_start >= lr_end > 0");
    if (!(gamma >= 0)) throw ConfigError("train: gamma must be >= 0");
  }

  LrSchedule lr_schedule() const { return {lr_start, lr_end, total_steps, schedule, step_interval, step_decay}; }
  AdamOptions adam() const { return {beta1, beta2, adam_eps}; }
};

struct EvalResult {
  std::vector<double> psnr;
  std::vector<double> ssim;
  double mean_psnr = 0;
  double mean_ssim = 0;
};

struct EvalPoint {
  std::size_t step = 0;  // number of completed steps
  double psnr = 0;
  double ssim = 0;
};

struct TrainReport {
  std::vector<double> loss;
  std::vector<double> lr;
  std::vector<EvalPoint> evals;
  WeightStore<float> weights;
  double seconds = 0;
};

namespace detail {
inline EvalResult summarize(EvalResult r) {
  double ps = 0, ss = 0;
  for (double v : r.psnr) ps += v;
  for (double v : r.ssim) ss += v;
  r.mean_psnr = r.psnr.empty() ? 0 : ps / static_cast<double>(r.psnr.size());
  r.mean_ssim = r.ssim.empty() ? 0 : ss / static_cast<double>(r.ssim.size());
  return r;
}

// HR cropped to a multiple of the scale, with its bicubic LR.
inline std::pair<Tensor<float>, Tensor<float>> degrade(const ImageU8& hr_img, std::size_t scale) {
  Tensor<float> hr = to_tensor<float>(hr_img);
  const std::size_t h = hr_img.height / scale * scale, w = hr_img.width / scale * scale;
  if (h == 0 || w == 0) throw DimensionError("image smaller than the scale factor");
  if (h != hr_img.height || w != hr_img.width) {
    Tensor<float> c(Shape{1, 3, h, w});
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) c(0, ch, y, x) = hr(0, ch, y, x);
    hr = std::move(c);
  }
  Tensor<float> lr = bicubic_downsample(hr, scale);
  return {std::move(lr), std::move(hr)};
}
}  // namespace detail

/// Y-channel PSNR/SSIM of `sr` against `hr` after removing `crop` border pixels.
template <typename T>
std::pair<double, double> y_metrics(const Tensor<T>& sr, const Tensor<T>& hr, std::size_t crop, bool quantize) {
  const YPlane a = crop_border(rgb_to_y(sr, 0, quantize), crop);
  const YPlane b = crop_border(rgb_to_y(hr, 0, false), crop);
  return {psnr(a, b), ssim(a, b)};
}

/// Super-resolves the bicubic LR of each HR image and scores it.
inline EvalResult evaluate(const WeightStore<float>& weights, const ModelConfig& cfg, const std::vector<ImageU8>& hr_images,
                           std::size_t crop, bool quantize = false) {
  EvalResult r;
  for (const auto& img : hr_images) {
    auto [lr, hr] = detail::degrade(img, cfg.scale);
    const Tensor<float> sr = infer(lr, weights, cfg);
    auto [p, s] = y_metrics(sr, hr, crop, quantize);
    r.psnr.push_back(p);
    r.ssim.push_back(s);
  }
  return detail::summarize(std::move(r));
}

/// Same protocol with nearest-neighbour upsampling in place of the network.
inline EvalResult evaluate_nearest(const std::vector<ImageU8>& hr_images, std::size_t scale, std::size_t crop) {
  EvalResult r;
  for (const auto& img : hr_images) {
    auto [lr, hr] = detail::degrade(img, scale);
    Graph<float> g;
    Tensor<float> up = nearest_upsample(g.constant(lr), scale).value();
    for (auto& v : up.data()) v = std::clamp(v, 0.0f, 1.0f);
    auto [p, s] = y_metrics(up, hr, crop, false);
    r.psnr.push_back(p);
    r.ssim.push_back(s);
  }
  return detail::summarize(std::move(r));
}

struct TrainHooks {
  std::function<void(std::size_t step, double loss, double lr)> on_step;
};

/// sample -> forward -> sr_loss -> backward -> adam_step, total_steps times.
/// Fully determined by the configs, the seed and the dataset.
inline TrainReport train(const ModelConfig& model_cfg, const TrainConfig& cfg, const std::vector<ImageU8>& dataset,
                         const std::vector<ImageU8>& eval_set = {}, const TrainHooks& hooks = {}) {
  model_cfg.validate();
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  report.weights = init_weights<float>(model_cfg, cfg.seed);
  Rng rng(cfg.seed ^ 0xA5A5A5A5DEADBEEFULL);
  AdamState<float> state;
  const LrSchedule sched = cfg.lr_schedule();
  const PatchOptions popt{cfg.patch_hr(model_cfg), cfg.batch, model_cfg.scale, cfg.augment};
  const LossConfig lcfg{cfg.gamma};

  auto fail = [&](const std::string& why) {
    if (!cfg.checkpoint_path.empty()) save_weights(cfg.checkpoint_path, model_cfg, report.weights);
    throw NumericError(why);
  };

  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    const double lr = lr_at(step, sched);
    auto [lr_batch, hr_batch] = sample_patches<float>(dataset, popt, rng);

    Graph<float> g;
    const auto params = bind_weights(g, report.weights, true);
    const Var<float> sr = model_forward(g.constant(std::move(lr_batch)), params, model_cfg);
    if (!sr.value().all_finite()) fail("train: non-finite network output at step " + std::to_string(step));
    const Var<float> loss = sr_loss(sr, g.constant(std::move(hr_batch)), lcfg);
    const double lv = loss.value()[0];
    if (!std::isfinite(lv)) fail("train: non-finite loss at step " + std::to_string(step));
    g.backward(loss);

    std::map<std::string, Tensor<float>> grads;
    for (const auto& [path, var] : params.vars()) grads.emplace(path, g.grad(var));
    try {
      adam_step(report.weights, grads, state, lr, cfg.adam());
    } catch (const NumericError& e) {
      fail(std::string(e.what()) + " at step " + std::to_string(step));
    }

    report.loss.push_back(lv);
    report.lr.push_back(lr);
    if (hooks.on_step) hooks.on_step(step, lv, lr);

    const bool last = step + 1 == cfg.total_steps;
    if (!eval_set.empty() && ((cfg.eval_interval > 0 && (step + 1) % cfg.eval_interval == 0) || last)) {
      const EvalResult e = evaluate(report.weights, model_cfg, eval_set, model_cfg.scale);
      report.evals.push_back({step + 1, e.mean_psnr, e.mean_ssim});
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

/// Mean of the last `window` losses (all of them if fewer).
inline double tail_mean(const std::vector<double>& v, std::size_t window) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = std::min(window, v.size());
  double s = 0;
  for (std::size_t i = v.size() - n; i < v.size(); ++i) s += v[i];
  return s / static_cast<double>(n);
}

namespace detail {
inline std::string metric_str(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}
}  // namespace detail

/// step,lr,loss,psnr,ssim; metric columns are empty on steps without evaluation.
inline void write_report_csv(std::ostream& os, const TrainReport& r) {
  os << "step,lr,loss,psnr,ssim\n";
  std::map<std::size_t, const EvalPoint*> by_step;
  for (const auto& e : r.evals) by_step[e.step] = &e;
  for (std::size_t i = 0; i < r.loss.size(); ++i) {
    os << (i + 1) << ',' << std::scientific << std::setprecision(9) << r.lr[i] << ',' << std::fixed
       << std::setprecision(8) << r.loss[i] << ',';
    auto it = by_step.find(i + 1);
    if (it != by_step.end()) os << detail::metric_str(it->second->psnr) << ',' << detail::metric_str(it->second->ssim);
    else os << ',';
    os << '\n';
  }
}

}  // namespace glsr
