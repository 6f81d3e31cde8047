#pragma once

// Shared generators and naive reference implementations for the tests.

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "bregnext/network.hpp"
#include "bregnext/random.hpp"
#include "bregnext/tensor.hpp"

namespace bnx::test {

template <typename T = float>
BasicTensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  BasicTensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

/// Direct 7-loop convolution, TF SAME or VALID padding, NHWC / HWIO.
inline TensorD naive_conv(const TensorD& x, const TensorD& k, std::size_t stride, bool same) {
  const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), ci = x.dim(3);
  const std::size_t kh = k.dim(0), kw = k.dim(1), co = k.dim(3);
  std::size_t oh, ow, pt = 0, pl = 0;
  if (same) {
    oh = (h + stride - 1) / stride;
    ow = (w + stride - 1) / stride;
    const long ph = std::max<long>(0, static_cast<long>((oh - 1) * stride + kh) - static_cast<long>(h));
    const long pw = std::max<long>(0, static_cast<long>((ow - 1) * stride + kw) - static_cast<long>(w));
    pt = static_cast<std::size_t>(ph / 2);
    pl = static_cast<std::size_t>(pw / 2);
  } else {
    oh = (h - kh) / stride + 1;
    ow = (w - kw) / stride + 1;
  }
  TensorD out(Shape{n, oh, ow, co});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xo = 0; xo < ow; ++xo)
        for (std::size_t o = 0; o < co; ++o) {
          double acc = 0.0;
          for (std::size_t dy = 0; dy < kh; ++dy)
            for (std::size_t dx = 0; dx < kw; ++dx) {
              const long iy = static_cast<long>(y * stride + dy) - static_cast<long>(pt);
              const long ix = static_cast<long>(xo * stride + dx) - static_cast<long>(pl);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
              for (std::size_t c = 0; c < ci; ++c)
                acc += x[((b * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)) * ci + c] *
                       k[((dy * kw + dx) * ci + c) * co + o];
            }
          out[((b * oh + y) * ow + xo) * co + o] = acc;
        }
  return out;
}

/// A two-unit adaptive network small enough to train in milliseconds.
inline NetworkConfig tiny_config(std::size_t classes = 3, HeadKind head = HeadKind::Categorical) {
  NetworkConfig cfg;
  cfg.name = "tiny";
  cfg.stem = {4, 3, 2};
  cfg.stages = {{1, 4, false}, {1, 8, true}};
  cfg.head = head;
  cfg.num_classes = classes;
  return cfg;
}

/// Largest |a_i - b_i|.
template <typename A, typename B>
double max_abs_diff(const A& a, const B& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return worst;
}

}  // namespace bnx::test

namespace bnx::test {

// Brute-force series oracles in long double. Moments come from the O(n^2)
// pairwise identities var = sum_{i<j} (x_i - x_j)^2 / n^2 and
// cov = sum_{i<j} (x_i - x_j)(y_i - y_j) / n^2, so they share no code path
// with the library's centred sums.
struct SeriesOracle {
  long double mx = 0, my = 0, vx = 0, vy = 0, cov = 0;

  SeriesOracle(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<long double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= n, my /= n;
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = i + 1; j < x.size(); ++j) {
        const long double dx = static_cast<long double>(x[i]) - x[j], dy = static_cast<long double>(y[i]) - y[j];
        vx += dx * dx, vy += dy * dy, cov += dx * dy;
      }
    vx /= n * n, vy /= n * n, cov /= n * n;
  }
  double cc() const { return static_cast<double>(cov / std::sqrt(vx * vy)); }
  double ccc() const { return static_cast<double>(2 * cov / (vx + vy + (mx - my) * (mx - my))); }
};

inline double oracle_rmse(std::span<const double> x, std::span<const double> y) {
  long double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (static_cast<long double>(x[i]) - y[i]) * (x[i] - y[i]);
  return static_cast<double>(std::sqrt(s / x.size()));
}

inline double oracle_sagr(std::span<const double> x, std::span<const double> y) {
  auto sign = [](double v) { return v > 0 ? 1 : v < 0 ? -1 : 0; };
  std::size_t agree = 0;
  for (std::size_t i = 0; i < x.size(); ++i) agree += sign(x[i]) == sign(y[i]);
  return static_cast<double>(agree) / static_cast<double>(x.size());
}

/// Random series pair of length 2..64 with a mix of scales, correlations and exact zeros.
inline std::pair<std::vector<double>, std::vector<double>> random_series(Rng& rng) {
  const std::size_t n = 2 + rng.below(63);
  const double scale = std::pow(10.0, rng.uniform(-2, 1));
  const double rho = rng.uniform(-1, 1), shift = rng.normal(0, 0.5);
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = scale * rng.normal();
    y[i] = rho * x[i] + std::sqrt(1 - rho * rho) * scale * rng.normal() + shift;
    if (rng.bernoulli(0.05)) x[i] = 0.0;
  }
  x[0] = -x[1] + 0.1;  // guarantees variance for n = 2
  return {x, y};
}

}  // namespace bnx::test
