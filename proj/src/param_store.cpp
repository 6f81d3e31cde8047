#include "bregnext/param_store.hpp"

#include <array>
#include <utility>

namespace bnx {
namespace {

constexpr std::array<std::pair<ParamRole, const char*>, 12> kRoleNames{{
    {ParamRole::ConvKernel, "conv_kernel"},
    {ParamRole::DenseWeight, "dense_weight"},
    {ParamRole::DenseBias, "dense_bias"},
    {ParamRole::BnGamma, "bn_gamma"},
    {ParamRole::BnBeta, "bn_beta"},
    {ParamRole::BnRunningMean, "bn_running_mean"},
    {ParamRole::BnRunningVar, "bn_running_var"},
    {ParamRole::BnStatCount, "bn_stat_count"},
    {ParamRole::MappingAlpha, "mapping_alpha"},
    {ParamRole::MappingBeta, "mapping_beta"},
    {ParamRole::InputMeans, "input_means"},
    {ParamRole::Generic, "generic"},
}};

}  // namespace

const char* role_name(ParamRole role) {
  for (const auto& [r, name] : kRoleNames)
    if (r == role) return name;
  return "generic";
}

ParamRole role_from_name(const std::string& name) {
  for (const auto& [r, n] : kRoleNames)
    if (name == n) return r;
  throw ConfigError("unknown parameter role '" + name + "'");
}

}  // namespace bnx
