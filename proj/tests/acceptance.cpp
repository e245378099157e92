// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "glsr/glsr.hpp"
#include "oracles.hpp"

using namespace glsr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double max_rel(const Tensor<double>& a, const Tensor<double>& ref) {
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - ref[i]));
    scale = std::max(scale, std::abs(ref[i]));
  }
  return diff / scale;
}

// 1. Gradient fidelity
Outcome gradient_fidelity() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto cases = run_gradchecks("all");
  const double secs = seconds_since(t0);
  for (const auto& c : cases) {
    o.pass = o.pass && c.passed();
    o.detail += c.name + "=" + fmt("%.2e", c.result.max_rel_error) + (c.passed() ? " " : "(over) ");
  }
  o.pass = o.pass && secs < 60;
  o.detail += "in " + fmt("%.1f", secs) + " s (limit 60 s)";
  return o;
}

// 2. Oracle equivalence
Outcome oracle_equivalence() {
  Outcome o;
  Rng rng(2024);
  double conv_worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t groups = std::size_t{1} << rng.below(3);
    const std::size_t cin = groups * (1 + rng.below(8 / groups)), cout = groups * (1 + rng.below(8 / groups));
    const std::size_t k = 1 + 2 * rng.below(2), stride = 1 + rng.below(2), pad = rng.below(k / 2 + 1);
    const std::size_t h = k + rng.below(17 - k), w = k + rng.below(17 - k);
    const auto x = oracle::random<double>({1 + rng.below(2), cin, h, w}, rng);
    const auto wt = oracle::random<double>({cout, cin / groups, k, k}, rng);
    const auto b = oracle::random<double>({cout, 1, 1, 1}, rng);
    Graph<float> g;
    const auto y = conv2d(g.constant(x.cast<float>()), g.constant(wt.cast<float>()), g.constant(b.cast<float>()),
                          {stride, pad, groups});
    conv_worst = std::max(conv_worst, max_rel(y.value().cast<double>(), oracle::conv2d(x, wt, &b, stride, pad, groups)));
  }
  double metric_worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    YPlane a(32, 32), b(32, 32);
    for (auto& v : a.values) v = rng.uniform(16, 235);
    for (std::size_t i = 0; i < b.values.size(); ++i) b.values[i] = trial % 2 ? rng.uniform(16, 235) : a.values[i] + rng.uniform(-20, 20);
    metric_worst = std::max({metric_worst, std::abs(psnr(a, b) - oracle::psnr(a, b)), std::abs(ssim(a, b) - oracle::ssim(a, b))});
  }
  double loss_worst = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto sr = oracle::random<double>({1, 3, 8, 8}, rng, 0, 1), hr = oracle::random<double>({1, 3, 8, 8}, rng, 0, 1);
    Graph<double> g;
    // frequency term alone: gamma = 1 total minus the gamma = 0 MAE
    const double f = sr_loss(g.constant(sr), g.constant(hr), {1.0}).value()[0] - sr_loss(g.constant(sr), g.constant(hr), {0.0}).value()[0];
    const double fo = oracle::sr_loss(sr, hr, 1.0) - oracle::sr_loss(sr, hr, 0.0);
    loss_worst = std::max(loss_worst, std::abs(f - fo) / fo);
  }
  o.pass = conv_worst <= 1e-6 && metric_worst <= 1e-7 && loss_worst <= 1e-8;
  o.detail = "conv rel " + fmt("%.2e", conv_worst) + " (<=1e-6, 200 cases); psnr/ssim abs " + fmt("%.2e", metric_worst) +
             " (<=1e-7, 50 pairs); loss freq rel " + fmt("%.2e", loss_worst) + " (<=1e-8)";
  return o;
}

// 3. Exact inverses
Outcome exact_inverses() {
  Rng rng(3);
  Graph<double> g;
  const auto x = oracle::random<double>({2, 8, 6, 6}, rng);
  const bool shuffle = pixel_unshuffle(pixel_shuffle(g.constant(x), 2), 2).value() == x &&
                       pixel_shuffle(pixel_unshuffle(g.constant(x), 3), 3).value() == x;
  const bool split = concat(channel_split(g.constant(x), 4)).value() == x && concat(channel_split(g.constant(x), 2)).value() == x;
  double rt = 0, parseval = 0;
  for (std::size_t n : {4, 6, 8, 12, 16}) {
    std::vector<double> p(n * n);
    for (auto& v : p) v = rng.uniform(-1, 1);
    const auto X = fft2d(std::span<const double>(p), n, n);
    const auto back = ifft2d_real(X);
    double diff = 0, scale = 0;
    long double e = 0, E = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      diff = std::max(diff, std::abs(back[i] - p[i]));
      scale = std::max(scale, std::abs(p[i]));
      e += p[i] * p[i];
      E += X.re[i] * X.re[i] + X.im[i] * X.im[i];
    }
    rt = std::max(rt, diff / scale);
    parseval = std::max(parseval, static_cast<double>(std::abs(e - E / static_cast<long double>(p.size())) / e));
  }
  Outcome o;
  o.pass = shuffle && split && rt <= 1e-10 && parseval <= 1e-10;
  o.detail = std::string("shuffle ") + (shuffle ? "bitwise" : "MISMATCH") + ", split/concat " + (split ? "bitwise" : "MISMATCH") +
             ", ifft(fft) rel " + fmt("%.2e", rt) + ", Parseval rel " + fmt("%.2e", parseval) + " (<=1e-10)";
  return o;
}

struct Recipe {
  TrainConfig train;
  std::vector<ImageU8> data, held;
};

Recipe desk_recipe() {
  Recipe r;
  r.train.total_steps = 1500;
  r.train.batch = 8;
  r.train.lr_patch = 32;
  r.train.lr_start = 1e-3;
  r.train.lr_end = 1e-5;
  r.train.gamma = 0.05;
  r.train.seed = 0;
  r.data = synth_dataset(0, 64, 64);
  r.held = synth_dataset(1, 16, 64);
  return r;
}

double head_mean(const std::vector<double>& v, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += v[i];
  return s / static_cast<double>(n);
}

bool loss_halved(const TrainReport& r, std::string& detail) {
  const double first = head_mean(r.loss, 100), last = tail_mean(r.loss, 100);
  bool finite = true;
  for (double l : r.loss) finite = finite && std::isfinite(l);
  detail = "loss " + fmt("%.4f", first) + " -> " + fmt("%.4f", last) + " (ratio " + fmt("%.3f", last / first) + ")";
  return finite && last < 0.5 * first;
}

// 4. Desk-scale training run
Outcome desk_training() {
  const Recipe rc = desk_recipe();
  const ModelConfig cfg{16, 2, 2};
  const auto a = train(cfg, rc.train, rc.data, rc.held);
  const auto b = train(cfg, rc.train, rc.data, rc.held);
  std::string loss_detail;
  const bool ok_a = loss_halved(a, loss_detail);
  const double net = a.evals.back().psnr;
  const double nearest = evaluate_nearest(rc.held, 2, 2).mean_psnr;
  const bool ok_b = net - nearest >= 0.5;
  const bool ok_c = a.seconds < 15 * 60;
  const bool ok_d = a.weights == b.weights && a.loss == b.loss;
  Outcome o;
  o.pass = ok_a && ok_b && ok_c && ok_d;
  o.detail = std::string("(a) ") + (ok_a ? "ok " : "FAIL ") + loss_detail + "; (b) " + (ok_b ? "ok " : "FAIL ") + "Y-PSNR " +
             fmt("%.3f", net) + " vs nearest " + fmt("%.3f", nearest) + " dB (+" + fmt("%.3f", net - nearest) +
             ", SSIM " + fmt("%.4f", a.evals.back().ssim) + "); (c) " + (ok_c ? "ok " : "FAIL ") + fmt("%.1f", a.seconds) +
             " s; (d) rerun " + (ok_d ? "bitwise identical" : "DIFFERS");
  return o;
}

// 5. Ablation behaviour
Outcome ablations() {
  const Recipe rc = desk_recipe();
  const ModelConfig full{16, 2, 2};
  Outcome o;
  const char* names[] = {"no-cfc", "no-scam", "no-glie"};
  for (int i = 0; i < 3; ++i) {
    ModelConfig cfg = full;
    (i == 0 ? cfg.enable_cfc : i == 1 ? cfg.enable_scam : cfg.enable_glie) = false;
    const bool fewer = count_params(cfg) < count_params(full);
    std::string detail;
    const bool halved = loss_halved(train(cfg, rc.train, rc.data), detail);
    o.pass = o.pass && fewer && halved;
    o.detail += std::string(names[i]) + ": params " + std::to_string(count_params(cfg)) + " < " + std::to_string(count_params(full)) +
                (fewer ? "" : " FAIL") + ", " + detail + (halved ? "" : " FAIL") + (i < 2 ? "; " : "");
  }
  return o;
}

// 6. Complexity counter
Outcome complexity() {
  const ModelConfig tiny{8, 1, 2};
  // head, scam (norm, channel, dw0..dw3, fuse), cfc (norm, expand, fuse), glie, tail
  const std::uint64_t sheet = (3 * 8 * 9 + 8) + (16 + 72 + 4 * (2 * 9 + 2) + 72) + (16 + (16 * 8 * 9 + 16) + 72) + (32 * 32 + 32) +
                              (12 * 16 * 9 + 12);
  const std::uint64_t counted = count_params(tiny), enumerated = init_weights<float>(tiny, 0).scalar_count();
  const ModelConfig cfg{16, 2, 2};
  const auto f1 = count_flops(cfg, 720, 1280), f2 = count_flops(cfg, 1440, 1280);
  Outcome o;
  o.pass = counted == sheet && enumerated == sheet && f2.flops == 2 * f1.flops;
  o.detail = "tiny params " + std::to_string(counted) + ", init scalars " + std::to_string(enumerated) + ", spreadsheet " +
             std::to_string(sheet) + "; FLOPs " + std::to_string(f1.flops) + " -> " + std::to_string(f2.flops) + " on doubling H";
  if (f2.flops != 2 * f1.flops) {
    const long long gap = static_cast<long long>(2 * f1.flops) - static_cast<long long>(f2.flops);
    o.detail += " (short of 2x by " + std::to_string(gap) + " FLOPs: pooled 1x1 channel convs do not scale with H)";
  }
  return o;
}

// 7. Schedule endpoints
Outcome schedule() {
  const LrSchedule s = desk_recipe().train.lr_schedule();
  Outcome o;
  o.pass = lr_at(0, s) == 1e-3 && lr_at(s.total_steps, s) == 1e-5;
  o.detail = "lr_at(0)=" + fmt("%.17g", lr_at(0, s)) + ", lr_at(T)=" + fmt("%.17g", lr_at(s.total_steps, s));
  return o;
}

// 8. I/O
Outcome io() {
  Rng rng(8);
  ImageU8 img(7, 5);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  const auto enc = write_ppm(img);
  const bool ppm = read_ppm(enc) == img && write_ppm(read_ppm(enc)) == enc;

  const ModelConfig cfg{8, 1, 2};
  const auto w = init_weights<float>(cfg, 8);
  const auto bytes = encode_checkpoint(cfg, w);
  const auto ck = decode_checkpoint<float>(bytes);
  const bool ckpt = ck.weights == w && ck.config == cfg && encode_checkpoint(ck.config, ck.weights) == bytes;

  const fs::path dir = fs::temp_directory_path() / "glsr_acceptance_io";
  fs::remove_all(dir);
  fs::create_directories(dir / "hr");
  const auto images = synth_dataset(7, 4, 48);
  for (std::size_t i = 0; i < images.size(); ++i) save_ppm((dir / "hr" / ("img" + std::to_string(i) + ".ppm")).string(), images[i]);
  const std::string hr = (dir / "hr").string();
  const char* argv[] = {"glsr", "eval", "--hr-dir", hr.c_str(), "--sr-dir", hr.c_str(), "--crop", "2"};
  std::ostringstream out, err;
  const int code = cli::run_cli(8, argv, out, err);
  fs::remove_all(dir);
  std::size_t perfect = 0, rows = 0;
  std::istringstream is(out.str());
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.rfind("mean,", 0) == 0) continue;
    ++rows;
    if (line.size() > 16 && line.substr(line.size() - 13) == ",inf,1.000000") ++perfect;
  }
  const bool eval = code == 0 && rows == images.size() && perfect == rows;
  Outcome o;
  o.pass = ppm && ckpt && eval;
  o.detail = std::string("ppm round trip ") + (ppm ? "bitwise" : "MISMATCH") + ", checkpoint round trip " + (ckpt ? "bitwise" : "MISMATCH") +
             ", eval HR-vs-HR " + std::to_string(perfect) + "/" + std::to_string(rows) + " images at PSNR inf, SSIM 1.000000";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 gradient fidelity", gradient_fidelity}, {"2 oracle equivalence", oracle_equivalence},
      {"3 exact inverses", exact_inverses},       {"4 desk-scale training", desk_training},
      {"5 ablation behaviour", ablations},        {"6 complexity counter", complexity},
      {"7 schedule endpoints", schedule},         {"8 io round trips", io},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %-24s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
