#pragma once

// Static computation graph with reverse-mode differentiation. Nodes may only
// consume nodes created before them, so insertion order is a topological
// order and cycles cannot be expressed.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bregnext/kernels.hpp"
#include "bregnext/losses.hpp"
#include "bregnext/mapping.hpp"
#include "bregnext/param_store.hpp"
#include "bregnext/tensor.hpp"

namespace bnx {

struct NodeId {
  std::uint32_t index = std::numeric_limits<std::uint32_t>::max();
  bool valid() const noexcept { return index != std::numeric_limits<std::uint32_t>::max(); }
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

enum class OpKind {
  Placeholder,
  Parameter,
  Identity,
  Add,
  Mul,
  Square,
  Sum,
  Mean,
  Conv2d,
  BatchNorm,
  Elu,
  GlobalAvgPool,
  AvgPool2x2,
  ChannelPad,
  Dense,
  Softmax,
  Mapping,
  AdaptiveMapping,
  FocalLoss,
  MseLoss,
};

const char* op_name(OpKind op);

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

struct NodeAttrs {
  Shape declared_shape;  // placeholders; 0 matches any extent
  std::size_t param = kNoIndex;
  std::size_t stride = 1;
  Padding padding = Padding::Same;
  double elu_alpha = 1.0;
  double epsilon = 1e-5;
  double momentum = 0.99;
  std::size_t running_mean = kNoIndex;
  std::size_t running_var = kNoIndex;
  std::size_t running_count = kNoIndex;
  std::size_t channels = 0;
  MappingKind mapping = MappingKind::identity();
  FocalLossConfig focal;
};

template <typename T>
struct GraphNode {
  OpKind op;
  std::string name;
  std::vector<NodeId> inputs;
  NodeAttrs attrs;
  BasicTensor<T> value;
  BasicTensor<T> grad;
  bool evaluated = false;
  BatchStats stats;  // batch-norm nodes only
};

template <typename T>
using Feeds = std::unordered_map<std::string, BasicTensor<T>>;

template <typename T>
class BasicGraph {
 public:
  // Construction ------------------------------------------------------------
  NodeId placeholder(std::string name, Shape declared);
  NodeId parameter(const BasicParamStore<T>& store, std::size_t index);
  NodeId identity(NodeId x, std::string name = {});
  NodeId add(NodeId a, NodeId b, std::string name = {});
  NodeId mul(NodeId a, NodeId b, std::string name = {});
  NodeId square(NodeId x, std::string name = {});
  NodeId sum(NodeId x, std::string name = {});
  NodeId mean(NodeId x, std::string name = {});
  NodeId conv2d(NodeId x, NodeId kernel, std::size_t stride, Padding padding, std::string name = {});
  /// running_* are ParamStore indices of the non-trainable statistics entries.
  NodeId batch_norm(NodeId x, NodeId gamma, NodeId beta, std::size_t running_mean, std::size_t running_var,
                    std::size_t running_count, double epsilon, double momentum, std::string name = {});
  NodeId elu(NodeId x, double a = 1.0, std::string name = {});
  NodeId global_avg_pool(NodeId x, std::string name = {});
  NodeId avg_pool2x2(NodeId x, std::string name = {});
  NodeId channel_pad(NodeId x, std::size_t channels, std::string name = {});
  NodeId dense(NodeId x, NodeId weights, NodeId bias, std::string name = {});
  NodeId softmax(NodeId x, std::string name = {});
  /// Fixed-parameter bypass mapping (any kind but Adaptive).
  NodeId mapping(NodeId x, MappingKind kind, std::string name = {});
  /// Adaptive mapping with scalar alpha/beta nodes.
  NodeId adaptive_mapping(NodeId x, NodeId alpha, NodeId beta, std::string name = {});
  /// labels: class indices stored as reals, one per row of probs.
  NodeId focal_loss(NodeId probs, NodeId labels, FocalLossConfig cfg, std::string name = {});
  NodeId mse_loss(NodeId pred, NodeId target, std::string name = {});

  // Inspection ----------------------------------------------------------------
  std::size_t size() const noexcept { return nodes_.size(); }
  const GraphNode<T>& node(NodeId id) const { return nodes_.at(id.index); }
  GraphNode<T>& node(NodeId id) { return nodes_.at(id.index); }
  std::optional<NodeId> find(const std::string& name) const;
  const BasicTensor<T>& value(NodeId id) const;

  // Execution -----------------------------------------------------------------
  /// Evaluates every ancestor of targets (all nodes when targets is empty).
  void evaluate(BasicParamStore<T>& store, const Feeds<T>& feeds, std::span<const NodeId> targets, Mode mode);
  /// Convenience: evaluate targets and return their values.
  std::vector<BasicTensor<T>> run(BasicParamStore<T>& store, const Feeds<T>& feeds, std::span<const NodeId> targets,
                                  Mode mode);

  /// Fills store gradients with d loss / d entry (previous gradients are
  /// discarded) and node gradients for every ancestor of loss.
  void backward(BasicParamStore<T>& store, NodeId loss);

  /// Name of the first evaluated node holding a non-finite value.
  std::optional<std::string> first_non_finite() const;

  /// When on, evaluation rejects the first node producing NaN/Inf.
  void set_finite_check(bool on) noexcept { finite_check_ = on; }
  /// When off, backward frees intermediate node gradients once consumed
  /// (parameters and placeholders keep theirs).
  void set_keep_intermediate_grads(bool on) noexcept { keep_grads_ = on; }

 private:
  NodeId add_node(OpKind op, std::vector<NodeId> inputs, NodeAttrs attrs, std::string name);
  void forward_node(GraphNode<T>& n, BasicParamStore<T>& store, const Feeds<T>& feeds, Mode mode);
  void backward_node(GraphNode<T>& n, BasicParamStore<T>& store);
  BasicTensor<T>& grad_slot(NodeId id);
  const BasicTensor<T>& in(const GraphNode<T>& n, std::size_t i) const { return nodes_[n.inputs[i].index].value; }

  std::vector<GraphNode<T>> nodes_;
  std::unordered_map<std::string, NodeId> by_name_;
  Mode last_mode_ = Mode::Train;
  bool finite_check_ = false;
  bool keep_grads_ = true;
};

using Graph = BasicGraph<float>;

}  // namespace bnx
