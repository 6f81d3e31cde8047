#pragma once

// Residual architectures: configuration, graph construction and cost
// accounting. Units use pre-activation ordering
//   F(x) = conv3x3(elu(bn(conv3x3(elu(bn(x))))))
//   y    = pad_channels(avg_pool(H(x))) + F(x)     (pool/pad on transitions only)
// with no activation after the sum.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bregnext/graph.hpp"
#include "bregnext/losses.hpp"
#include "bregnext/mapping.hpp"
#include "bregnext/param_store.hpp"
#include "bregnext/random.hpp"

namespace bnx {

enum class HeadKind { Categorical, Dimensional };

const char* head_name(HeadKind head);
HeadKind head_from_name(const std::string& name);

struct StemConfig {
  std::size_t channels = 32;
  std::size_t kernel = 3;
  std::size_t stride = 1;
};

/// A run of residual units at one width. A transition stage starts with a
/// unit that halves resolution and widens channels.
struct StageConfig {
  std::size_t units = 1;
  std::size_t channels = 32;
  bool transition = false;
  friend bool operator==(const StageConfig&, const StageConfig&) = default;
};

struct NetworkConfig {
  std::string name;
  std::size_t input_height = 64;
  std::size_t input_width = 64;
  std::size_t input_channels = 3;
  StemConfig stem;
  std::vector<StageConfig> stages;
  MappingKind bypass = MappingKind::adaptive();
  HeadKind head = HeadKind::Categorical;
  std::size_t num_classes = 8;

  /// Throws ConfigError on an empty stage list, zero sizes, decreasing
  /// widths, a non-transition width change or a transition that narrows.
  void validate() const;

  std::size_t unit_count() const;
  std::vector<std::size_t> unit_counts() const;
  /// Convolutions (stem + two per unit) plus the fully connected head.
  std::size_t weight_layers() const { return 1 + 2 * unit_count() + 1; }
  std::size_t outputs() const { return head == HeadKind::Categorical ? num_classes : 2; }
  bool adaptive() const { return bypass.tag() == MappingKind::Tag::Adaptive; }
};

struct ResidualUnitConfig {
  std::string name;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t stride = 1;
  MappingKind bypass = MappingKind::identity();

  bool has_adaptive_params() const { return bypass.tag() == MappingKind::Tag::Adaptive; }
  void validate() const;
};

/// Per-unit configurations in network order; units are named unit1, unit2, ...
std::vector<ResidualUnitConfig> unit_configs(const NetworkConfig& cfg);

/// ResNet-32, ResNet-50, BReG-Net-32, BReG-Net-50, BReG-NeXt-32, BReG-NeXt-50.
NetworkConfig named_config(const std::string& name);
const std::vector<std::string>& named_architectures();

/// BReG-NeXt depth series 26, 32, ..., 68: each step adds one unit to each
/// of the three non-transition stages of the 26-layer base [3,1,4,1,3].
NetworkConfig depth_config(std::size_t layers);
const std::vector<std::size_t>& depth_series();

/// Named architectures (any case) or breg-next-<depth>.
NetworkConfig architecture_config(const std::string& name);

/// Same stages, fixed arctan bypass (alpha = 1, beta = 0 frozen).
NetworkConfig non_adaptive(NetworkConfig cfg);

/// Versioned JSON document.
std::string config_to_text(const NetworkConfig& cfg);
NetworkConfig config_from_text(const std::string& text);

struct UnitHandles {
  std::string name;
  NodeId input;
  NodeId bypass;
  NodeId branch;
  NodeId output;
  std::vector<NodeId> convs;
  std::size_t alpha = kNoIndex;  // ParamStore indices, adaptive units only
  std::size_t beta = kNoIndex;
};

/// Weight init: N(0, 2 / fan_in) for convolutions and dense weights, zero
/// dense bias, BN gamma = 1 / beta = 0, alpha = 1, beta = 0.
template <typename T>
UnitHandles build_unit(BasicGraph<T>& graph, BasicParamStore<T>& store, const ResidualUnitConfig& cfg, NodeId input,
                       Rng& rng);

template <typename T>
struct BasicModel {
  NetworkConfig config;
  BasicParamStore<T> params;
  BasicGraph<T> graph;

  NodeId input;    // (N,H,W,C) zero-centred images
  NodeId labels;   // (N) class indices, categorical head
  NodeId targets;  // (N,2) valence/arousal, dimensional head
  NodeId stem;
  NodeId features;  // last unit output
  NodeId pooled;
  NodeId output;  // logits (categorical) or linear outputs (dimensional)
  NodeId probs;   // categorical only
  NodeId loss;
  std::vector<UnitHandles> units;
  std::vector<NodeId> conv_outputs;  // stem first, then two per unit
  std::size_t channel_means = kNoIndex;

  /// Logits or linear outputs.
  BasicTensor<T> forward(const BasicTensor<T>& batch, Mode mode);
  /// Softmax probabilities (categorical) or linear outputs (dimensional).
  BasicTensor<T> predict(const BasicTensor<T>& batch, Mode mode = Mode::Infer);
  /// Forward + backward on one batch; returns the loss. answers holds labels
  /// (N) or targets (N,2) according to the head.
  double loss_and_gradients(const BasicTensor<T>& batch, const BasicTensor<T>& answers, Mode mode = Mode::Train);
  double loss_value(const BasicTensor<T>& batch, const BasicTensor<T>& answers, Mode mode = Mode::Train);

  MappingParams mapping_params(std::size_t unit) const;
  /// Sets every adaptive unit's (alpha, beta).
  void set_mapping_params(double alpha, double beta);

 private:
  Feeds<T> feeds_for(const BasicTensor<T>& batch, const BasicTensor<T>* answers) const;
};

using Model = BasicModel<float>;
using ModelD = BasicModel<double>;

template <typename T>
BasicModel<T> build_network(const NetworkConfig& cfg, std::uint64_t seed, const FocalLossConfig& focal = {});

/// Copies every entry whose name and shape match; returns how many were copied.
template <typename T, typename U>
std::size_t copy_shared_parameters(const BasicParamStore<T>& from, BasicParamStore<U>& to) {
  std::size_t copied = 0;
  for (const auto& e : from.entries()) {
    auto idx = to.find(e.name);
    if (!idx || to[*idx].value.shape() != e.value.shape()) continue;
    to[*idx].value = e.value.template cast<U>();
    ++copied;
  }
  return copied;
}

struct LayerCost {
  std::string layer;
  std::uint64_t parameters = 0;
  std::uint64_t flops = 0;
};

struct CostReport {
  std::vector<LayerCost> layers;
  std::uint64_t parameters = 0;
  std::uint64_t flops = 0;
};

/// All trainable scalars (convolutions, BN gamma/beta, dense, alpha/beta) grouped by owner.
template <typename T>
CostReport count_parameters(const BasicModel<T>& model);

/// FLOPs for one sample of the given spatial size: 2 x MACs for
/// convolutions and the dense head, plus elementwise work (BN 2/elem,
/// ELU 1/elem, non-identity bypass 1/elem, pooling 1/input elem, sum
/// 1/elem, softmax 3/class).
CostReport count_flops(const NetworkConfig& cfg, std::size_t height, std::size_t width);
template <typename T>
CostReport count_flops(const BasicModel<T>& model, const Shape& input_hwc);

/// Per-layer parameters and FLOPs merged into one report.
CostReport cost_report(const NetworkConfig& cfg);

}  // namespace bnx
