#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

#include "bregnext/random.hpp"
#include "bregnext/tensor.hpp"

namespace bnx {
namespace {

TEST(Tensor, ShapeAndData) {
  TensorD t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(shape_str(t.shape()), "(2,3)");
  t.reshape({3, 2});
  EXPECT_EQ(t.dim(0), 3u);
  EXPECT_THROW(t.reshape({4}), std::invalid_argument);
  EXPECT_THROW(TensorD({2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  EXPECT_THROW(t.item(), std::invalid_argument);
  EXPECT_DOUBLE_EQ(TensorD::scalar(4).item(), 4.0);
}

TEST(Tensor, CastAndFiniteCheck) {
  const TensorD t = TensorD::vector({1.25, -2.5});
  const auto f = t.cast<float>();
  EXPECT_EQ(f[0], 1.25f);
  EXPECT_TRUE(t.all_finite());
  TensorD bad = t;
  bad[1] = std::nan("");
  EXPECT_FALSE(bad.all_finite());
  EXPECT_EQ(t, t);
  EXPECT_NE(t, bad);
}

TEST(Rng, SeedDeterminismAndStreams) {
  Rng a(5), b(5), c(6);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
  }
  EXPECT_NE(Rng(5).next(), c.next());
  EXPECT_EQ(Rng::derive(9, 3).next(), Rng::derive(9, 3).next());
  EXPECT_NE(Rng::derive(9, 3).next(), Rng::derive(9, 4).next());
  EXPECT_NE(Rng::derive(9, 3).next(), Rng::derive(10, 3).next());
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(7);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
}

TEST(Rng, BelowCoversRangeUniformly) {
  Rng rng(8);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto k = rng.below(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng rng(9);
  for (std::size_t n : {0u, 1u, 2u, 17u, 100u}) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    rng.shuffle(std::span<std::size_t>(v));
    std::vector<std::size_t> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(sorted[i], i);
  }
  std::vector<int> a(50), b(50);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 0);
  Rng r1(3), r2(3);
  r1.shuffle(std::span<int>(a));
  r2.shuffle(std::span<int>(b));
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace bnx
