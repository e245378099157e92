// SPDX-License-Identifier: Apache-2.0
#pragma once

// Command-line front end. run_cli() returns the process exit code:
// 0 success, 1 runtime failure (or a failed gradcheck), 2 usage error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "glsr/glsr.hpp"

namespace glsr::cli {

namespace fs = std::filesystem;

inline std::vector<fs::path> list_ppm(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  if (out.empty()) throw std::runtime_error("no .ppm files in " + dir.string());
  return out;
}

inline std::vector<ImageU8> load_dir(const fs::path& dir) {
  std::vector<ImageU8> out;
  for (const auto& p : list_ppm(dir)) out.push_back(load_ppm(p.string()));
  return out;
}

struct TrainArgs {
  std::string config, data = "synthetic", out, report, eval_dir;
};

inline int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig rc = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  rc.train.checkpoint_path = a.out;
  std::vector<ImageU8> data, eval_set;
  if (a.data == "synthetic") {
    data = synth_dataset(rc.train.seed, rc.synth_count, rc.synth_size);
    eval_set = synth_dataset(rc.train.seed + 1, rc.eval_count, rc.synth_size);
  } else {
    data = load_dir(a.data);
  }
  if (!a.eval_dir.empty()) eval_set = load_dir(a.eval_dir);

  TrainHooks hooks;
  hooks.on_step = [&](std::size_t step, double loss, double lr) {
    if ((step + 1) % 100 == 0 || step == 0) {
      err << "step " << (step + 1) << '/' << rc.train.total_steps << " loss " << std::fixed << std::setprecision(6) << loss
          << " lr " << std::scientific << std::setprecision(3) << lr << std::defaultfloat << '\n';
    }
  };
  const TrainReport r = train(rc.model, rc.train, data, eval_set, hooks);
  save_weights(a.out, rc.model, r.weights);
  if (!a.report.empty()) {
    std::ofstream os(a.report);
    if (!os) throw std::runtime_error("cannot write " + a.report);
    write_report_csv(os, r);
  }
  out << "steps " << r.loss.size() << " final_loss " << std::fixed << std::setprecision(6) << tail_mean(r.loss, 100);
  if (!r.evals.empty()) {
    out << " psnr " << detail::metric_str(r.evals.back().psnr) << " ssim " << detail::metric_str(r.evals.back().ssim);
  }
  out << " seconds " << std::setprecision(1) << r.seconds << std::defaultfloat << '\n';
  return 0;
}

inline int cmd_infer(const std::string& ckpt, const std::string& in, const std::string& outp, std::ostream& out) {
  const auto ck = load_weights<float>(ckpt);
  const ImageU8 lr = load_ppm(in);
  const Tensor<float> sr = infer(to_tensor<float>(lr), ck.weights, ck.config);
  const ImageU8 img = to_image(sr);
  save_ppm(outp, img);
  out << "wrote " << outp << " (" << img.width << 'x' << img.height << ")\n";
  return 0;
}

struct EvalArgs {
  std::string ckpt, hr_dir, sr_dir;
  std::optional<std::size_t> crop;
  bool quantize = false;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.ckpt.empty() && a.sr_dir.empty()) throw UsageError("eval needs --ckpt or --sr-dir");
  std::optional<Checkpoint<float>> ck;
  if (!a.ckpt.empty()) ck = load_weights<float>(a.ckpt);
  const std::size_t crop = a.crop.value_or(ck ? ck->config.scale : 0);

  out << "image,psnr,ssim\n";
  double ps = 0, ss = 0;
  std::size_t n = 0;
  for (const auto& path : list_ppm(a.hr_dir)) {
    const ImageU8 hr_img = load_ppm(path.string());
    double p = 0, s = 0;
    if (!a.sr_dir.empty()) {
      const ImageU8 sr_img = load_ppm((fs::path(a.sr_dir) / path.filename()).string());
      const YPlane ya = rgb_to_y(sr_img), yb = rgb_to_y(hr_img);
      p = psnr(ya, yb, crop);
      s = ssim(crop_border(ya, crop), crop_border(yb, crop));
    } else {
      auto [lr, hr] = detail::degrade(hr_img, ck->config.scale);
      std::tie(p, s) = y_metrics(infer(lr, ck->weights, ck->config), hr, crop, a.quantize);
    }
    out << path.filename().string() << ',' << detail::metric_str(p) << ',' << detail::metric_str(s) << '\n';
    ps += p;
    ss += s;
    ++n;
  }
  out << "mean," << detail::metric_str(ps / static_cast<double>(n)) << ',' << detail::metric_str(ss / static_cast<double>(n))
      << '\n';
  return 0;
}

struct CountArgs {
  ModelConfig model;
  bool no_scam = false, no_cfc = false, no_glie = false;
  std::string hr = "1280x720";
  std::string csv;
  int flops_per_mac = 2;
};

inline std::pair<std::size_t, std::size_t> parse_size(const std::string& s) {
  const auto x = s.find('x');
  std::size_t w = 0, h = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    w = std::stoul(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    h = std::stoul(s.substr(x + 1), &used);
    if (used != s.size() - x - 1) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw ConfigError("--hr expects WIDTHxHEIGHT, got '" + s + "'");
  }
  return {w, h};
}

inline void write_cost_csv(std::ostream& os, const CostReport& r, int flops_per_mac) {
  os << "layer,params,macs,flops\n";
  for (const auto& l : r.layers) os << l.path << ',' << l.params << ',' << l.macs << ',' << l.macs * flops_per_mac << '\n';
  os << "total," << r.params << ',' << r.macs << ',' << r.macs * static_cast<std::uint64_t>(flops_per_mac) << '\n';
}

inline int cmd_count(CountArgs a, std::ostream& out) {
  a.model.enable_scam = !a.no_scam;
  a.model.enable_cfc = !a.no_cfc;
  a.model.enable_glie = !a.no_glie;
  const auto [w, h] = parse_size(a.hr);
  const CostReport r = count_flops(a.model, h, w);
  const auto fpm = static_cast<std::uint64_t>(a.flops_per_mac);

  std::size_t width = 5;
  for (const auto& l : r.layers) width = std::max(width, l.path.size());
  out << std::left << std::setw(static_cast<int>(width)) << "layer" << std::right << std::setw(12) << "params"
      << std::setw(18) << "MACs" << '\n';
  for (const auto& l : r.layers) {
    out << std::left << std::setw(static_cast<int>(width)) << l.path << std::right << std::setw(12) << l.params
        << std::setw(18) << l.macs << '\n';
  }
  out << std::left << std::setw(static_cast<int>(width)) << "total" << std::right << std::setw(12) << r.params
      << std::setw(18) << r.macs << '\n';
  out << "hr " << w << 'x' << h << " lr " << r.lr_width << 'x' << r.lr_height << '\n';
  out << "params " << r.params << '\n';
  out << "macs " << r.macs << '\n';
  out << "flops " << r.macs * fpm << " (" << fpm << " per MAC)\n";
  if (!a.csv.empty()) {
    std::ofstream os(a.csv);
    if (!os) throw std::runtime_error("cannot write " + a.csv);
    write_cost_csv(os, r, a.flops_per_mac);
  }
  return 0;
}

inline int cmd_gradcheck(const std::string& module, std::ostream& out) {
  bool ok = true;
  out << "module,max_rel_error,tolerance,samples,status\n";
  for (const auto& c : run_gradchecks(module)) {
    ok = ok && c.passed();
    out << c.name << ',' << std::scientific << std::setprecision(3) << c.result.max_rel_error << ',' << c.tolerance << ','
        << std::defaultfloat << c.result.samples << ',' << (c.passed() ? "ok" : "FAIL") << '\n';
  }
  return ok ? 0 : 1;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"glsr: lightweight super-resolution toolkit"};
  app.name("glsr");
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  train_cmd->add_option("--config", ta.config, "key=value run configuration");
  train_cmd->add_option("--data", ta.data, "directory of .ppm HR images, or 'synthetic'");
  train_cmd->add_option("--out", ta.out, "checkpoint to write")->required();
  train_cmd->add_option("--report", ta.report, "CSV training report");
  train_cmd->add_option("--eval-dir", ta.eval_dir, "held-out .ppm HR images");

  std::string ckpt, in, outp;
  auto* infer_cmd = app.add_subcommand("infer", "super-resolve one PPM image");
  infer_cmd->add_option("--ckpt", ckpt, "checkpoint")->required();
  infer_cmd->add_option("--in", in, "LR .ppm")->required();
  infer_cmd->add_option("--out", outp, "SR .ppm to write")->required();

  EvalArgs ea;
  std::size_t crop = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Y-channel PSNR/SSIM over a directory of HR images");
  eval_cmd->add_option("--ckpt", ea.ckpt, "checkpoint (SR = model applied to bicubic LR)");
  eval_cmd->add_option("--hr-dir", ea.hr_dir, "directory of HR .ppm images")->required();
  eval_cmd->add_option("--sr-dir", ea.sr_dir, "score existing SR images with matching names instead");
  auto* crop_opt = eval_cmd->add_option("--crop", crop, "border pixels removed before scoring (default: scale)");
  eval_cmd->add_flag("--quantize", ea.quantize, "round SR to 8 bits before scoring");

  CountArgs ca;
  auto* count_cmd = app.add_subcommand("count", "parameter and MAC/FLOP report");
  count_cmd->add_option("--channels", ca.model.channels, "feature channels C")->required();
  count_cmd->add_option("--blocks", ca.model.blocks, "block count N")->required();
  count_cmd->add_option("--scale", ca.model.scale, "upscale factor s")->required();
  count_cmd->add_flag("--no-scam", ca.no_scam);
  count_cmd->add_flag("--no-cfc", ca.no_cfc);
  count_cmd->add_flag("--no-glie", ca.no_glie);
  count_cmd->add_option("--hr", ca.hr, "HR size WxH")->capture_default_str();
  count_cmd->add_option("--csv", ca.csv, "also write the per-layer report as CSV");
  count_cmd->add_option("--flops-per-mac", ca.flops_per_mac, "FLOP convention")->check(CLI::IsMember({1, 2}))->capture_default_str();

  std::string module = "all";
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gc_cmd->add_option("--module", module)
      ->check(CLI::IsMember({"all", "conv2d", "layer_norm", "mul", "scam", "cfc", "block", "glie", "model", "loss"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train_cmd) return cmd_train(ta, out, err);
    if (*infer_cmd) return cmd_infer(ckpt, in, outp, out);
    if (*eval_cmd) {
      if (*crop_opt) ea.crop = crop;
      return cmd_eval(ea, out);
    }
    if (*count_cmd) return cmd_count(ca, out);
    if (*gc_cmd) return cmd_gradcheck(module, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace glsr::cli
