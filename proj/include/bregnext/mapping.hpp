#pragma once

// Bypass mappings for residual units: the adaptive bounded-derivative
// arctangent mapping and the fixed alternatives it is compared against.
//
//   H(x; a, b)  = atan(a x / s) / (a s),    s = sqrt(b^2 + 1)
//   H'(x; a, b) = 1 / (a^2 x^2 + b^2 + 1)   in (0, 1]

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>

#include "bregnext/error.hpp"
#include "bregnext/tensor.hpp"

namespace bnx {

/// Optimizer floor on |alpha|; the mapping is undefined at alpha = 0.
inline constexpr double kAlphaMin = 1e-3;
/// Below this |alpha| the mapping is evaluated through its alpha -> 0 limit x / (b^2 + 1).
inline constexpr double kLimitAlpha = 1e-6;

/// |alpha| >= kAlphaMin, keeping the sign; exactly zero goes to +kAlphaMin.
inline double clamp_alpha(double alpha) {
  if (alpha >= kAlphaMin || alpha <= -kAlphaMin) return alpha;
  return alpha < 0.0 ? -kAlphaMin : kAlphaMin;
}

struct MappingParams {
  double alpha = 1.0;
  double beta = 0.0;
  std::string unit;
};

class MappingKind {
 public:
  enum class Tag { Identity, LambdaScaled, H1Arctan, H2XArctanLog, H3LogExp, Adaptive };

  static MappingKind identity() { return {Tag::Identity, 0.0}; }
  static MappingKind lambda_scaled(double lambda) { return {Tag::LambdaScaled, lambda}; }
  static MappingKind h1() { return {Tag::H1Arctan, 0.0}; }
  static MappingKind h2() { return {Tag::H2XArctanLog, 0.0}; }
  static MappingKind h3(double alpha) {
    if (alpha == 0.0) throw ConfigError("H3 mapping requires a nonzero alpha");
    return {Tag::H3LogExp, alpha};
  }
  static MappingKind adaptive() { return {Tag::Adaptive, 0.0}; }

  /// Accepts identity, lambda:<v>, h1, h2, h3:<alpha>, adaptive.
  static MappingKind parse(const std::string& text);
  std::string to_string() const;

  Tag tag() const noexcept { return tag_; }
  /// lambda for LambdaScaled, alpha for H3.
  double scalar() const noexcept { return scalar_; }

  friend bool operator==(const MappingKind&, const MappingKind&) = default;

 private:
  MappingKind(Tag tag, double scalar) : tag_(tag), scalar_(scalar) {}
  Tag tag_;
  double scalar_;
};

// Scalar kernels ------------------------------------------------------------

template <typename T>
T breg_value(T x, T alpha, T beta) {
  const T s2 = beta * beta + T(1);
  if (std::abs(alpha) < T(kLimitAlpha)) return x / s2;
  const T s = std::sqrt(s2);
  return std::atan(alpha * x / s) / (alpha * s);
}

template <typename T>
T breg_slope(T x, T alpha, T beta) {
  return T(1) / (alpha * alpha * x * x + beta * beta + T(1));
}

template <typename T>
struct BregPartials {
  T dalpha;
  T dbeta;
};

/// dH/dalpha = (x H' - H) / alpha,  dH/dbeta = -beta (x H' + H) / s^2.
/// Near alpha = 0 the first form is replaced by its series -2 alpha x^3 / (3 s^4).
template <typename T>
BregPartials<T> breg_partials(T x, T alpha, T beta, T h) {
  const T s2 = beta * beta + T(1);
  const T slope = breg_slope(x, alpha, beta);
  T dalpha;
  if (std::abs(alpha) < T(kLimitAlpha))
    dalpha = T(-2) * alpha * x * x * x / (T(3) * s2 * s2);
  else
    dalpha = (x * slope - h) / alpha;
  const T dbeta = -beta * (x * slope + h) / s2;
  return {dalpha, dbeta};
}

template <typename T>
BregPartials<T> breg_partials(T x, T alpha, T beta) {
  return breg_partials(x, alpha, beta, breg_value(x, alpha, beta));
}

template <typename T>
T mapping_value(const MappingKind& kind, T x, T alpha = T(1), T beta = T(0)) {
  switch (kind.tag()) {
    case MappingKind::Tag::Identity:
      return x;
    case MappingKind::Tag::LambdaScaled:
      return T(kind.scalar()) * x;
    case MappingKind::Tag::H1Arctan:
      return std::atan(x);
    case MappingKind::Tag::H2XArctanLog:
      return x * std::atan(x) - T(0.5) * std::log1p(x * x);
    case MappingKind::Tag::H3LogExp: {
      const T a2 = T(kind.scalar() * kind.scalar());
      const T la = std::log(a2);
      // (x - log(e^x + a2)) / a2, the antiderivative of 1 / (e^x + a2); log-sum-exp form avoids overflow
      const T lse = std::max(x, la) + std::log1p(std::exp(-std::abs(x - la)));
      return (x - lse) / a2;
    }
    case MappingKind::Tag::Adaptive:
      return breg_value(x, alpha, beta);
  }
  return x;
}

template <typename T>
T mapping_slope(const MappingKind& kind, T x, T alpha = T(1), T beta = T(0)) {
  switch (kind.tag()) {
    case MappingKind::Tag::Identity:
      return T(1);
    case MappingKind::Tag::LambdaScaled:
      return T(kind.scalar());
    case MappingKind::Tag::H1Arctan:
      return T(1) / (T(1) + x * x);
    case MappingKind::Tag::H2XArctanLog:
      return std::atan(x);
    case MappingKind::Tag::H3LogExp:
      return T(1) / (std::exp(x) + T(kind.scalar() * kind.scalar()));
    case MappingKind::Tag::Adaptive:
      return breg_slope(x, alpha, beta);
  }
  return T(1);
}

// Tensor operations ----------------------------------------------------------

template <typename T>
BasicTensor<T> breg_forward(const BasicTensor<T>& x, const MappingParams& p) {
  BasicTensor<T> out(x.shape());
  const T a = T(p.alpha), b = T(p.beta);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = breg_value(x[i], a, b);
  return out;
}

template <typename T>
BasicTensor<T> breg_derivative(const BasicTensor<T>& x, const MappingParams& p) {
  BasicTensor<T> out(x.shape());
  const T a = T(p.alpha), b = T(p.beta);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = breg_slope(x[i], a, b);
  return out;
}

/// Gradients of sum(upstream * H(x)) with respect to alpha and beta.
template <typename T>
std::pair<double, double> breg_param_gradients(const BasicTensor<T>& x, const MappingParams& p,
                                               const BasicTensor<T>& upstream) {
  if (x.shape() != upstream.shape())
    throw ShapeError(p.unit, "upstream " + shape_str(upstream.shape()) + " vs input " + shape_str(x.shape()));
  double da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto d = breg_partials<double>(x[i], p.alpha, p.beta);
    da += static_cast<double>(upstream[i]) * d.dalpha;
    db += static_cast<double>(upstream[i]) * d.dbeta;
  }
  return {da, db};
}

/// Elementwise evaluation of a mapping kind; Adaptive draws alpha/beta from params.
template <typename T>
BasicTensor<T> mapping_eval(const MappingKind& kind, const BasicTensor<T>& x, const MappingParams& params = {}) {
  BasicTensor<T> out(x.shape());
  const T a = T(params.alpha), b = T(params.beta);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = mapping_value(kind, x[i], a, b);
  return out;
}

template <typename T>
BasicTensor<T> mapping_derivative(const MappingKind& kind, const BasicTensor<T>& x,
                                  const MappingParams& params = {}) {
  BasicTensor<T> out(x.shape());
  const T a = T(params.alpha), b = T(params.beta);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = mapping_slope(kind, x[i], a, b);
  return out;
}

/// One unit's contribution to the bypass-chain gradient: dF/dx + dH/dx.
struct PathFactor {
  double dF = 0.0;
  double dH = 1.0;
};

/// Product of (dF + dH) over a chain of units; 1 for an empty chain.
double grad_path_product(std::span<const PathFactor> factors);

}  // namespace bnx
