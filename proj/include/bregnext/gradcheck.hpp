#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "bregnext/error.hpp"
#include "bregnext/tensor.hpp"

namespace bnx {

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate, in 64-bit.
inline TensorD finite_difference_gradient(const std::function<double(const TensorD&)>& f, TensorD x, double h) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  TensorD grad(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NonFiniteError("finite_difference", "f is not finite near coordinate " + std::to_string(i));
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// |a - b| / max(|a|, |b|, floor). The floor keeps coordinates where both
/// gradients vanish from dominating the comparison.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

template <typename A, typename B>
double max_relative_error(const A& a, const B& b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, relative_error(static_cast<double>(a[i]), static_cast<double>(b[i]), floor));
  return worst;
}

}  // namespace bnx

#include <cstdint>
#include <optional>
#include <vector>

#include "bregnext/graph.hpp"
#include "bregnext/mapping.hpp"
#include "bregnext/network.hpp"

namespace bnx {

struct GradcheckOptions {
  double step = 1e-3;
  double floor = 1e-6;
  std::uint64_t seed = 1;
  std::size_t mapping_samples = 2000;
  std::size_t coords_per_entry = 64;  // sampled when an entry is larger
  std::size_t network_coords = 160;
  std::size_t network_batch = 4;
  std::size_t network_image = 16;
};

struct GradcheckResult {
  std::string category;
  double max_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // coordinate with the largest error
  std::string note;

  bool passed(double tolerance) const { return max_error <= tolerance; }
};

/// Compares the store gradients left by backward(loss) with central
/// differences of the loss on every trainable entry (sampled beyond
/// coords_per_entry). A graph without trainable entries passes vacuously
/// with the note "no parameters".
GradcheckResult check_graph(const std::string& category, BasicGraph<double>& graph, BasicParamStore<double>& store,
                            NodeId loss, const Feeds<double>& feeds, Mode mode, const GradcheckOptions& opts,
                            std::size_t coords_per_entry);

/// Adaptive mapping: dH/dx, dH/dalpha and dH/dbeta against differences of H.
GradcheckResult gradcheck_adaptive_mapping(const GradcheckOptions& opts);
/// Fixed mappings (identity, lambda, H1, H2, H3): slope against differences.
/// With `only`, that kind alone.
GradcheckResult gradcheck_fixed_mappings(const GradcheckOptions& opts, std::optional<MappingKind> only = {});
/// One result per graph primitive, each a small graph in 64-bit.
std::vector<GradcheckResult> gradcheck_primitives(const GradcheckOptions& opts);
/// Whole network in 64-bit on a random batch at network_image x network_image,
/// batch-norm in training mode, with randomised alpha/beta and BN affine terms.
GradcheckResult gradcheck_network(NetworkConfig cfg, const GradcheckOptions& opts);

}  // namespace bnx
