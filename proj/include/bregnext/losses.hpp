#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "bregnext/error.hpp"
#include "bregnext/tensor.hpp"

namespace bnx {

/// FL(p_t) = -alpha_t (1 - p_t)^gamma log(p_t), averaged over the batch.
/// p_t is the softmax probability of the true class; one alpha_t for all classes.
struct FocalLossConfig {
  double alpha_t = 0.25;
  double gamma = 2.0;

  void validate() const {
    if (!(gamma >= 0.0)) throw ConfigError("focal loss gamma must be >= 0");
    if (!(alpha_t >= 0.0 && alpha_t <= 1.0)) throw ConfigError("focal loss alpha_t must lie in [0,1]");
  }
};

inline constexpr double kFocalProbFloor = 1e-7;

namespace detail {

template <typename T>
std::size_t checked_label(const BasicTensor<T>& labels, std::size_t n, std::size_t classes) {
  const double raw = static_cast<double>(labels[n]);
  if (!(raw >= 0.0) || raw != std::floor(raw) || raw >= static_cast<double>(classes))
    throw DataError("label " + std::to_string(raw) + " of sample " + std::to_string(n) + " outside [0," +
                    std::to_string(classes) + ")");
  return static_cast<std::size_t>(raw);
}

template <typename T>
void check_focal_shapes(const BasicTensor<T>& probs, const BasicTensor<T>& labels) {
  if (probs.rank() != 2 || labels.size() != probs.dim(0))
    throw ShapeError("focal_loss", "probabilities " + shape_str(probs.shape()) + " vs labels " +
                                       shape_str(labels.shape()));
}

}  // namespace detail

/// labels holds class indices stored as reals, one per row of probs.
template <typename T>
double focal_loss(const BasicTensor<T>& probs, const BasicTensor<T>& labels, const FocalLossConfig& cfg) {
  detail::check_focal_shapes(probs, labels);
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = detail::checked_label(labels, i, k);
    const double pt = std::max(static_cast<double>(probs[i * k + y]), kFocalProbFloor);
    total += -cfg.alpha_t * std::pow(1.0 - pt, cfg.gamma) * std::log(pt);
  }
  return total / static_cast<double>(n);
}

/// d focal_loss / d probs; only the true-class column is nonzero.
template <typename T>
BasicTensor<T> focal_loss_grad(const BasicTensor<T>& probs, const BasicTensor<T>& labels,
                               const FocalLossConfig& cfg) {
  detail::check_focal_shapes(probs, labels);
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  BasicTensor<T> grad(probs.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = detail::checked_label(labels, i, k);
    const double p = static_cast<double>(probs[i * k + y]);
    if (p < kFocalProbFloor) continue;  // clamped region is flat
    const double q = 1.0 - p;
    double d = -std::pow(q, cfg.gamma) / p;
    if (cfg.gamma != 0.0 && q > 0.0) d += cfg.gamma * std::pow(q, cfg.gamma - 1.0) * std::log(p);
    grad[i * k + y] = static_cast<T>(cfg.alpha_t * d / static_cast<double>(n));
  }
  return grad;
}

template <typename T>
double mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("mse_loss", shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    total += d * d;
  }
  return total / static_cast<double>(pred.size());
}

template <typename T>
BasicTensor<T> mse_loss_grad(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("mse_loss", shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  BasicTensor<T> grad(pred.shape());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    grad[i] = static_cast<T>(scale * (static_cast<double>(pred[i]) - static_cast<double>(target[i])));
  return grad;
}

}  // namespace bnx
