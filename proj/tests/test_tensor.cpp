// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "glsr/errors.hpp"
#include "glsr/random.hpp"
#include "glsr/tensor.hpp"

using namespace glsr;

TEST(Shape, SizeAndString) {
  const Shape s{2, 3, 4, 5};
  EXPECT_EQ(s.size(), 120u);
  EXPECT_EQ(s.plane(), 20u);
  EXPECT_EQ(s.str(), "(2,3,4,5)");
  EXPECT_EQ(s, (Shape{2, 3, 4, 5}));
  EXPECT_NE(s, (Shape{2, 3, 5, 4}));
}

TEST(Tensor, ConstructionAndIndexing) {
  Tensor<float> t(Shape{1, 2, 2, 3}, 1.5f);
  EXPECT_EQ(t.size(), 12u);
  for (float v : t.data()) EXPECT_EQ(v, 1.5f);
  t(0, 1, 1, 2) = 7.0f;
  EXPECT_EQ(t[11], 7.0f);
  EXPECT_EQ(t.plane(0, 1)[5], 7.0f);
  EXPECT_EQ(t.index(0, 1, 0, 1), 7u);
}

TEST(Tensor, RejectsZeroExtentAndBadLength) {
  EXPECT_THROW(Tensor<float>(Shape{1, 0, 2, 2}), DimensionError);
  EXPECT_THROW(Tensor<double>(Shape{1, 1, 2, 2}, std::vector<double>(3)), DimensionError);
}

TEST(Tensor, ReshapeKeepsData) {
  Tensor<double> t(Shape{1, 4, 1, 1}, std::vector<double>{1, 2, 3, 4});
  const auto r = t.reshaped(Shape{1, 1, 2, 2});
  EXPECT_EQ(r(0, 0, 1, 0), 3.0);
  EXPECT_THROW((void)t.reshaped(Shape{1, 1, 3, 1}), DimensionError);
}

TEST(Tensor, CastAndFiniteness) {
  Tensor<double> t(Shape{1, 1, 1, 3}, std::vector<double>{0.5, -2.0, 3.25});
  const Tensor<float> f = t.cast<float>();
  EXPECT_EQ(f[2], 3.25f);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
  t[1] = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(t.all_finite());
}

TEST(Tensor, MaxAbsDiff) {
  Tensor<double> a(Shape{1, 1, 1, 3}, std::vector<double>{1, 2, 3});
  Tensor<double> b(Shape{1, 1, 1, 3}, std::vector<double>{1, 2.5, 2});
  EXPECT_DOUBLE_EQ(max_abs_diff(a, b), 1.0);
  EXPECT_THROW(max_abs_diff(a, Tensor<double>(Shape{1, 1, 3, 1})), DimensionError);
}

TEST(Rng, DeterministicAndInRange) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    differs = differs || u != c.uniform();
    EXPECT_LT(a.below(7), 7u);
    (void)b.below(7);
  }
  EXPECT_TRUE(differs);
}
