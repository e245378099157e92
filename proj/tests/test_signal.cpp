// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <limits>

#include "glsr/diagnostics.hpp"
#include "glsr/fft.hpp"
#include "glsr/loss.hpp"
#include "oracles.hpp"

using namespace glsr;

namespace {

std::vector<double> random_plane(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

double rel_err(const ComplexPlane& a, const std::vector<std::complex<double>>& b) {
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    diff = std::max(diff, std::abs(std::complex<double>(a.re[i], a.im[i]) - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / scale;
}

double roundtrip_err(std::size_t h, std::size_t w, FftPath path, Rng& rng) {
  const auto x = random_plane(h * w, rng);
  const auto back = ifft2d_real(fft2d(std::span<const double>(x), h, w, path), path);
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    diff = std::max(diff, std::abs(back[i] - x[i]));
    scale = std::max(scale, std::abs(x[i]));
  }
  return diff / scale;
}

Tensor<double> random_tensor(Shape s, Rng& rng, double lo, double hi) {
  return oracle::random<double>(s, rng, lo, hi);
}

}  // namespace

TEST(Fft, DeltaGivesFlatSpectrum) {
  std::vector<double> x(16, 0.0);
  x[0] = 1;
  const auto X = fft2d(std::span<const double>(x), 4, 4);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(X.re[i], 1.0);
    EXPECT_EQ(X.im[i], 0.0);
  }
}

TEST(Fft, ConstantGoesToDc) {
  const std::vector<double> x(16, 0.75);
  const auto X = fft2d(std::span<const double>(x), 4, 4);
  EXPECT_NEAR(X.re[0], 16 * 0.75, 1e-15);
  for (std::size_t i = 1; i < 16; ++i) EXPECT_NEAR(std::hypot(X.re[i], X.im[i]), 0.0, 1e-14);
}

TEST(Fft, MatchesDirectDft) {
  Rng rng(1);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {4, 16}, {6, 12}, {5, 3}, {1, 8}}) {
    const auto x = random_plane(h * w, rng);
    std::vector<std::complex<double>> xc(x.begin(), x.end());
    const auto ref = oracle::dft2d(xc, h, w);
    EXPECT_LT(rel_err(fft2d(std::span<const double>(x), h, w), ref), 1e-12) << h << "x" << w;
    EXPECT_LT(rel_err(fft2d(std::span<const double>(x), h, w, FftPath::direct), ref), 1e-12) << h << "x" << w;
  }
}

TEST(Fft, RoundTrips) {
  Rng rng(2);
  for (std::size_t n : {4, 8, 16}) EXPECT_LE(roundtrip_err(n, n, FftPath::automatic, rng), 1e-12) << n;
  for (std::size_t n : {6, 12}) EXPECT_LE(roundtrip_err(n, n, FftPath::direct, rng), 1e-10) << n;
  for (std::size_t n : {6, 12}) EXPECT_LE(roundtrip_err(n, n, FftPath::automatic, rng), 1e-10) << n;
}

TEST(Fft, PathsAgreeOnPowersOfTwo) {
  Rng rng(3);
  for (std::size_t n : {2, 4, 8, 16, 32}) {
    const auto x = random_plane(n * n, rng);
    const auto a = fft2d(std::span<const double>(x), n, n, FftPath::automatic);
    const auto b = fft2d(std::span<const double>(x), n, n, FftPath::direct);
    double diff = 0, scale = 0;
    for (std::size_t i = 0; i < n * n; ++i) {
      diff = std::max(diff, std::hypot(a.re[i] - b.re[i], a.im[i] - b.im[i]));
      scale = std::max(scale, std::hypot(b.re[i], b.im[i]));
    }
    EXPECT_LE(diff / scale, 1e-10) << n;
  }
}

TEST(Fft, Parseval) {
  Rng rng(4);
  const auto x = random_plane(64, rng);
  const auto X = fft2d(std::span<const double>(x), 8, 8);
  long double lhs = 0, rhs = 0;
  for (double v : x) lhs += v * v;
  for (std::size_t i = 0; i < 64; ++i) rhs += X.re[i] * X.re[i] + X.im[i] * X.im[i];
  rhs /= 64;
  EXPECT_LE(std::abs(static_cast<double>((lhs - rhs) / lhs)), 1e-10);
}

TEST(Fft, RejectsLengthMismatch) {
  const std::vector<double> x(10);
  EXPECT_THROW(fft2d(std::span<const double>(x), 3, 3), DimensionError);
}

// sr_loss

TEST(SrLoss, IdenticalInputsGiveZero) {
  Rng rng(5);
  const auto x = random_tensor({2, 3, 8, 8}, rng, 0, 1);
  Graph<double> g;
  EXPECT_EQ(sr_loss(g.constant(x), g.constant(x)).value()[0], 0.0);
}

TEST(SrLoss, PureMae) {
  Rng rng(6);
  const auto hr = random_tensor({1, 3, 8, 8}, rng, 0, 0.5);
  auto sr = hr;
  for (auto& v : sr.data()) v += 0.5;
  Graph<double> g;
  EXPECT_NEAR(sr_loss(g.constant(sr), g.constant(hr), LossConfig{0.0}).value()[0], 0.5, 1e-15);
}

TEST(SrLoss, MatchesDirectDftOracle) {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const auto sr = random_tensor({1, 3, 8, 8}, rng, 0, 1);
    const auto hr = random_tensor({1, 3, 8, 8}, rng, 0, 1);
    Graph<double> g;
    const double v = sr_loss(g.constant(sr), g.constant(hr), LossConfig{0.05}).value()[0];
    const double ref = oracle::sr_loss(sr, hr, 0.05);
    EXPECT_LE(std::abs(v - ref) / ref, 1e-8);
  }
  // non-power-of-two planes take the direct path
  const auto sr = random_tensor({2, 3, 6, 10}, rng, 0, 1);
  const auto hr = random_tensor({2, 3, 6, 10}, rng, 0, 1);
  Graph<double> g;
  const double v = sr_loss(g.constant(sr), g.constant(hr), LossConfig{0.05}).value()[0];
  EXPECT_LE(std::abs(v - oracle::sr_loss(sr, hr, 0.05)) / v, 1e-8);
}

TEST(SrLoss, GradCheck) { EXPECT_LT(gradcheck_loss().result.max_rel_error, kKinkTolerance); }

TEST(SrLoss, SymmetricAndNonNegative) {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = random_tensor({1, 3, 8, 8}, rng, 0, 1);
    const auto b = random_tensor({1, 3, 8, 8}, rng, 0, 1);
    Graph<double> g;
    const double ab = sr_loss(g.constant(a), g.constant(b)).value()[0];
    const double ba = sr_loss(g.constant(b), g.constant(a)).value()[0];
    EXPECT_GE(ab, 0.0);
    EXPECT_NEAR(ab, ba, 1e-15);
  }
}

TEST(SrLoss, FrequencyTermInvariantUnderCyclicShift) {
  Rng rng(9);
  const auto a = random_tensor({1, 3, 8, 8}, rng, 0, 1);
  const auto b = random_tensor({1, 3, 8, 8}, rng, 0, 1);
  auto shift = [](const Tensor<double>& t, std::size_t dy, std::size_t dx) {
    Tensor<double> o(t.shape());
    const Shape s = t.shape();
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) o(0, c, (y + dy) % s.h, (x + dx) % s.w) = t(0, c, y, x);
    return o;
  };
  // gamma = 1 minus gamma = 0 isolates the frequency term
  auto freq = [](const Tensor<double>& x, const Tensor<double>& y) {
    Graph<double> g;
    return sr_loss(g.constant(x), g.constant(y), LossConfig{1.0}).value()[0] -
           sr_loss(g.constant(x), g.constant(y), LossConfig{0.0}).value()[0];
  };
  EXPECT_NEAR(freq(a, b), freq(shift(a, 3, 5), shift(b, 3, 5)), 1e-9);
}

TEST(SrLoss, GradientFlowsToBothOperands) {
  Rng rng(10);
  Graph<double> g;
  const auto a = g.leaf(random_tensor({1, 3, 8, 8}, rng, 0, 1), true);
  const auto b = g.leaf(random_tensor({1, 3, 8, 8}, rng, 0, 1), true);
  g.backward(sr_loss(a, b));
  const auto ga = g.grad(a), gb = g.grad(b);
  for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_EQ(ga[i], -gb[i]);
}

TEST(SrLoss, RejectsNonFiniteAndMismatch) {
  Graph<double> g;
  Tensor<double> a({1, 3, 4, 4}), b({1, 3, 4, 4});
  EXPECT_THROW(sr_loss(g.constant(a), g.constant(Tensor<double>({1, 3, 4, 5}))), DimensionError);
  a[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(sr_loss(g.constant(a), g.constant(b)), NumericError);
}
