#include "bregnext/optimizer.hpp"

#include <cmath>

#include "bregnext/error.hpp"
#include "bregnext/mapping.hpp"

namespace bnx {

void AdamConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("adam betas must lie in [0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
  if (!(base_lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(decay_factor > 0.0) || decay_period == 0) throw ConfigError("bad learning-rate decay");
  if (!(l2 >= 0.0)) throw ConfigError("l2 coefficient must be non-negative");
}

bool decays(ParamRole role) { return role == ParamRole::ConvKernel || role == ParamRole::DenseWeight; }

OptimizerState make_optimizer(const ParamStore& params, const AdamConfig& config) {
  config.validate();
  OptimizerState s;
  s.config = config;
  for (const auto& e : params.entries()) {
    s.m.push_back(e.trainable ? Tensor(e.value.shape()) : Tensor());
    s.v.push_back(e.trainable ? Tensor(e.value.shape()) : Tensor());
  }
  return s;
}

double lr_at_epoch(std::size_t epoch, const OptimizerState& state) {
  const auto& c = state.config;
  return c.base_lr * std::pow(c.decay_factor, static_cast<double>(epoch / c.decay_period));
}

void adam_step(ParamStore& params, OptimizerState& state, double lr) {
  if (!params.grads_fresh()) throw StateError("adam_step before backward");
  if (state.m.size() != params.size()) throw StateError("optimizer state does not match the parameter store");
  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(c.beta1, t);
  const double c2 = 1.0 - std::pow(c.beta2, t);
  const float b1 = static_cast<float>(c.beta1), b2 = static_cast<float>(c.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = params[i];
    if (!e.trainable) continue;
    if (state.m[i].shape() != e.value.shape()) throw StateError("optimizer moment shape mismatch for " + e.name);
    const float l2 = decays(e.role) ? static_cast<float>(c.l2) : 0.0f;
    float* w = e.value.raw();
    const float* g = e.grad.raw();
    float* m = state.m[i].raw();
    float* v = state.v[i].raw();
    for (std::size_t j = 0; j < e.value.size(); ++j) {
      const float gj = l2 != 0.0f ? g[j] + l2 * w[j] : g[j];
      m[j] = b1 * m[j] + (1.0f - b1) * gj;
      v[j] = b2 * v[j] + (1.0f - b2) * gj * gj;
      const double mhat = static_cast<double>(m[j]) / c1;
      const double vhat = static_cast<double>(v[j]) / c2;
      w[j] = static_cast<float>(static_cast<double>(w[j]) - lr * mhat / (std::sqrt(vhat) + c.epsilon));
    }
    if (e.role == ParamRole::MappingAlpha) {
      for (auto& a : e.value.data()) a = static_cast<float>(clamp_alpha(static_cast<double>(a)));
    }
  }
  params.set_grads_fresh(false);
}

}  // namespace bnx
