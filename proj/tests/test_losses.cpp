#include <gtest/gtest.h>

#include <cmath>

#include "bregnext/error.hpp"
#include "bregnext/kernels.hpp"
#include "bregnext/losses.hpp"
#include "support.hpp"

namespace bnx {
namespace {

TEST(FocalLoss, WorkedSingleSample) {
  // -0.25 * (0.1)^2 * log(0.9)
  const TensorD p({1, 2}, std::vector<double>{0.9, 0.1});
  const TensorD y = TensorD::vector({0.0});
  const double v = focal_loss(p, y, FocalLossConfig{0.25, 2.0});
  EXPECT_NEAR(v, 2.63401e-4, 5e-10);
  EXPECT_NEAR(v, -0.25 * 0.01 * std::log(0.9), 1e-18);
}

TEST(FocalLoss, ReducesToCrossEntropy) {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const auto z = test::random_tensor<double>({16, 8}, rng, -4.0, 4.0);
    const auto p = softmax(z);
    TensorD y(Shape{16});
    double ce = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
      y[i] = static_cast<double>(rng.below(8));
      ce -= std::log(p[i * 8 + static_cast<std::size_t>(y[i])]);
    }
    EXPECT_NEAR(focal_loss(p, y, FocalLossConfig{1.0, 0.0}), ce / 16.0, 1e-7);
  }
}

TEST(FocalLoss, NonNegativeAndDecreasingInPt) {
  const FocalLossConfig cfg;
  double prev = INFINITY;
  for (int i = 1; i < 1000; ++i) {
    const double pt = i / 1000.0;
    const TensorD p({1, 2}, std::vector<double>{pt, 1.0 - pt});
    const double v = focal_loss(p, TensorD::vector({0.0}), cfg);
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, prev);
    prev = v;
  }
  const TensorD one({1, 2}, std::vector<double>{1.0, 0.0});
  EXPECT_EQ(focal_loss(one, TensorD::vector({0.0}), cfg), 0.0);
}

TEST(FocalLoss, FloorKeepsZeroProbabilityFinite) {
  const TensorD p({1, 2}, std::vector<double>{0.0, 1.0});
  const double v = focal_loss(p, TensorD::vector({0.0}), FocalLossConfig{});
  EXPECT_NEAR(v, -0.25 * std::pow(1.0 - kFocalProbFloor, 2) * std::log(kFocalProbFloor), 1e-12);
}

TEST(FocalLoss, GradientMatchesDifferences) {
  const FocalLossConfig cfg{0.25, 2.0};
  const TensorD y = TensorD::vector({1.0, 0.0, 2.0});
  TensorD p({3, 3}, std::vector<double>{0.2, 0.5, 0.3, 0.7, 0.1, 0.2, 0.3, 0.3, 0.4});
  const auto g = focal_loss_grad(p, y, cfg);
  const double h = 1e-7;
  for (std::size_t i = 0; i < p.size(); ++i) {
    TensorD up = p, down = p;
    up[i] += h;
    down[i] -= h;
    const double fd = (focal_loss(up, y, cfg) - focal_loss(down, y, cfg)) / (2 * h);
    EXPECT_NEAR(g[i], fd, 1e-7);
  }
}

TEST(FocalLoss, RejectsBadLabelsAndShapes) {
  const TensorD p({2, 3}, 1.0 / 3);
  EXPECT_THROW(focal_loss(p, TensorD::vector({0.0, 3.0}), {}), DataError);
  EXPECT_THROW(focal_loss(p, TensorD::vector({0.0, 0.5}), {}), DataError);
  EXPECT_THROW(focal_loss(p, TensorD::vector({-1.0, 0.0}), {}), DataError);
  EXPECT_THROW(focal_loss(p, TensorD::vector({0.0}), {}), ShapeError);
  EXPECT_THROW((FocalLossConfig{1.5, 2.0}.validate()), ConfigError);
  EXPECT_THROW((FocalLossConfig{0.25, -1.0}.validate()), ConfigError);
}

TEST(Mse, ValueAndGradient) {
  const TensorD pred({2, 2}, std::vector<double>{0.5, -0.5, 1.0, 0.0});
  const TensorD target({2, 2}, std::vector<double>{0.0, 0.0, 0.0, 1.0});
  EXPECT_DOUBLE_EQ(mse_loss(pred, target), (0.25 + 0.25 + 1.0 + 1.0) / 4);
  const auto g = mse_loss_grad(pred, target);
  EXPECT_DOUBLE_EQ(g[0], 0.25);
  EXPECT_DOUBLE_EQ(g[3], -0.5);
  EXPECT_THROW(mse_loss(pred, TensorD({4})), ShapeError);
}

}  // namespace
}  // namespace bnx
