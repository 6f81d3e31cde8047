#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bregnext/param_store.hpp"

namespace bnx {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double base_lr = 1e-4;
  double decay_factor = 0.8;
  std::size_t decay_period = 10;  // epochs
  double l2 = 1e-4;               // convolution kernels and dense weights only

  void validate() const;
};

struct OptimizerState {
  AdamConfig config;
  std::vector<Tensor> m;  // one per store entry; empty for non-trainable entries
  std::vector<Tensor> v;
  std::uint64_t step = 0;
};

OptimizerState make_optimizer(const ParamStore& params, const AdamConfig& config = {});

/// base_lr * decay_factor^floor(epoch / decay_period)
double lr_at_epoch(std::size_t epoch, const OptimizerState& state);

/// One bias-corrected ADAM update of every trainable entry, then the
/// |alpha| >= kAlphaMin clamp. Consumes the gradients: a second step without
/// an intervening backward pass throws StateError.
void adam_step(ParamStore& params, OptimizerState& state, double lr);

/// L2 applies to this role.
bool decays(ParamRole role);

}  // namespace bnx
