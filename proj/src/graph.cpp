#include "bregnext/graph.hpp"

#include <algorithm>
#include <cmath>

namespace bnx {

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::Placeholder: return "placeholder";
    case OpKind::Parameter: return "parameter";
    case OpKind::Identity: return "identity";
    case OpKind::Add: return "add";
    case OpKind::Mul: return "mul";
    case OpKind::Square: return "square";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::BatchNorm: return "batch_norm";
    case OpKind::Elu: return "elu";
    case OpKind::GlobalAvgPool: return "global_avg_pool";
    case OpKind::AvgPool2x2: return "avg_pool2x2";
    case OpKind::ChannelPad: return "channel_pad";
    case OpKind::Dense: return "dense";
    case OpKind::Softmax: return "softmax";
    case OpKind::Mapping: return "mapping";
    case OpKind::AdaptiveMapping: return "adaptive_mapping";
    case OpKind::FocalLoss: return "focal_loss";
    case OpKind::MseLoss: return "mse_loss";
  }
  return "?";
}

template <typename T>
NodeId BasicGraph<T>::add_node(OpKind op, std::vector<NodeId> inputs, NodeAttrs attrs, std::string name) {
  const auto idx = static_cast<std::uint32_t>(nodes_.size());
  for (NodeId i : inputs)
    if (!i.valid() || i.index >= idx)
      throw ConfigError(std::string(op_name(op)) + " node refers to a node that does not precede it");
  if (name.empty()) name = std::string(op_name(op)) + "#" + std::to_string(idx);
  if (by_name_.contains(name)) throw ConfigError("duplicate node name '" + name + "'");
  by_name_.emplace(name, NodeId{idx});
  nodes_.push_back(GraphNode<T>{op, std::move(name), std::move(inputs), std::move(attrs), {}, {}, false, {}});
  return NodeId{idx};
}

template <typename T>
NodeId BasicGraph<T>::placeholder(std::string name, Shape declared) {
  NodeAttrs a;
  a.declared_shape = std::move(declared);
  return add_node(OpKind::Placeholder, {}, std::move(a), std::move(name));
}

template <typename T>
NodeId BasicGraph<T>::parameter(const BasicParamStore<T>& store, std::size_t index) {
  NodeAttrs a;
  a.param = index;
  return add_node(OpKind::Parameter, {}, std::move(a), store[index].name);
}

template <typename T>
NodeId BasicGraph<T>::identity(NodeId x, std::string name) {
  return add_node(OpKind::Identity, {x}, {}, std::move(name));
}
template <typename T>
NodeId BasicGraph<T>::add(NodeId a, NodeId b, std::string name) {
  return add_node(OpKind::Add, {a, b}, {}, std::move(name));
}
template <typename T>
NodeId BasicGraph<T>::mul(NodeId a, NodeId b, std::string name) {
  return add_node(OpKind::Mul, {a, b}, {}, std::move(name));
}
template <typename T>
NodeId BasicGraph<T>::square(NodeId x, std::string name) {
  return add_node(OpKind::Square, {x}, {}, std::move(name));
}
template <typename T>
NodeId BasicGraph<T>::sum(NodeId x, std::string name) {
  return add_node(OpKind::Sum, {x}, {}, std::move(name));
}
template <typename T>
NodeId BasicGraph<T>::mean(NodeId x, std::string name) {
  return add_node(OpKind::Mean, {x}, {}, std::move(name));
}

template <typename T>
NodeId BasicGraph<T>::conv2d(NodeId x, NodeId kernel, std::size_t stride, Padding padding, std::string name) {
  if (stride == 0) throw ConfigError("conv2d stride must be positive");
  NodeAttrs a;
  a.stride = stride;
  a.padding = padding;
  return add_node(OpKind::Conv2d, {x, kernel}, std::move(a), std::move(name));
}

template <typename T>
NodeId BasicGraph<T>::batch_norm(NodeId x, NodeId gamma, NodeId beta, std::size_t running_mean,
                                 std::size_t running_var, std::size_t running_count, double epsilon, double momentum,
                                 std::string name) {
  NodeAttrs a;
  a.running_mean = running_mean;
  a.running_var = running_var;
  a.running_count = running_count;
  a.epsilon = epsilon;
  a.momentum = momentum;
  return add_node(OpKind::BatchNorm, {x, gamma, beta}, std::move(a), std::move(name));
}

template <typename T>
NodeId BasicGraph<T>::elu(NodeId x, double alpha, std::string name) {
  NodeAttrs a;
  a.elu_alpha = alpha;
  return add_node(OpKind::Elu, {x}, std::move(a), std::move(name));
}
template <typename T>
NodeId BasicGraph<T>::global_avg_pool(NodeId x, std::string name) {
  return add_node(OpKind::GlobalAvgPool, {x}, {}, std::move(name));
}
template <typename T>
NodeId BasicGraph<T>::avg_pool2x2(NodeId x, std::string name) {
  return add_node(OpKind::AvgPool2x2, {x}, {}, std::move(name));
}
template <typename T>
NodeId BasicGraph<T>::channel_pad(NodeId x, std::size_t channels, std::string name) {
  NodeAttrs a;
  a.channels = channels;
  return add_node(OpKind::ChannelPad, {x}, std::move(a), std::move(name));
}
template <typename T>
NodeId BasicGraph<T>::dense(NodeId x, NodeId weights, NodeId bias, std::string name) {
  return add_node(OpKind::Dense, {x, weights, bias}, {}, std::move(name));
}
template <typename T>
NodeId BasicGraph<T>::softmax(NodeId x, std::string name) {
  return add_node(OpKind::Softmax, {x}, {}, std::move(name));
}

template <typename T>
NodeId BasicGraph<T>::mapping(NodeId x, MappingKind kind, std::string name) {
  if (kind.tag() == MappingKind::Tag::Adaptive)
    throw ConfigError("adaptive mappings need alpha/beta nodes; use adaptive_mapping");
  NodeAttrs a;
  a.mapping = kind;
  return add_node(OpKind::Mapping, {x}, std::move(a), std::move(name));
}

template <typename T>
NodeId BasicGraph<T>::adaptive_mapping(NodeId x, NodeId alpha, NodeId beta, std::string name) {
  NodeAttrs a;
  a.mapping = MappingKind::adaptive();
  return add_node(OpKind::AdaptiveMapping, {x, alpha, beta}, std::move(a), std::move(name));
}

template <typename T>
NodeId BasicGraph<T>::focal_loss(NodeId probs, NodeId labels, FocalLossConfig cfg, std::string name) {
  cfg.validate();
  NodeAttrs a;
  a.focal = cfg;
  return add_node(OpKind::FocalLoss, {probs, labels}, std::move(a), std::move(name));
}

template <typename T>
NodeId BasicGraph<T>::mse_loss(NodeId pred, NodeId target, std::string name) {
  return add_node(OpKind::MseLoss, {pred, target}, {}, std::move(name));
}

template <typename T>
std::optional<NodeId> BasicGraph<T>::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

template <typename T>
const BasicTensor<T>& BasicGraph<T>::value(NodeId id) const {
  const auto& n = node(id);
  if (!n.evaluated) throw StateError("node '" + n.name + "' has not been evaluated");
  return n.value;
}

namespace {

template <typename T>
void require_same_shape(const GraphNode<T>& n, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError(n.name, shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <typename T>
T scalar_of(const GraphNode<T>& n, const BasicTensor<T>& t) {
  if (t.size() != 1) throw ShapeError(n.name, "expected a scalar, got " + shape_str(t.shape()));
  return t[0];
}

}  // namespace

template <typename T>
void BasicGraph<T>::forward_node(GraphNode<T>& n, BasicParamStore<T>& store, const Feeds<T>& feeds, Mode mode) {
  try {
    switch (n.op) {
      case OpKind::Placeholder: {
        auto it = feeds.find(n.name);
        if (it == feeds.end()) throw ShapeError(n.name, "no feed supplied for placeholder");
        const Shape& got = it->second.shape();
        const Shape& want = n.attrs.declared_shape;
        bool ok = got.size() == want.size();
        for (std::size_t i = 0; ok && i < want.size(); ++i) ok = want[i] == 0 || want[i] == got[i];
        if (!ok) throw ShapeError(n.name, "feed " + shape_str(got) + " vs declared " + shape_str(want));
        n.value = it->second;
        break;
      }
      case OpKind::Parameter:
        n.value = store[n.attrs.param].value;
        break;
      case OpKind::Identity:
        n.value = in(n, 0);
        break;
      case OpKind::Add:
      case OpKind::Mul: {
        const auto& a = in(n, 0);
        const auto& b = in(n, 1);
        require_same_shape(n, a, b);
        n.value = BasicTensor<T>(a.shape());
        if (n.op == OpKind::Add)
          for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] + b[i];
        else
          for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] * b[i];
        break;
      }
      case OpKind::Square: {
        const auto& x = in(n, 0);
        n.value = BasicTensor<T>(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] * x[i];
        break;
      }
      case OpKind::Sum:
      case OpKind::Mean: {
        const auto& x = in(n, 0);
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += static_cast<double>(x[i]);
        if (n.op == OpKind::Mean) s /= static_cast<double>(std::max<std::size_t>(1, x.size()));
        n.value = BasicTensor<T>::scalar(static_cast<T>(s));
        break;
      }
      case OpKind::Conv2d:
        n.value = bnx::conv2d(in(n, 0), in(n, 1), n.attrs.stride, n.attrs.padding);
        break;
      case OpKind::BatchNorm: {
        const auto& x = in(n, 0);
        auto& rmean = store[n.attrs.running_mean].value;
        auto& rvar = store[n.attrs.running_var].value;
        auto& rcount = store[n.attrs.running_count].value;
        if (mode == Mode::Train) {
          n.value = batch_norm_train(x, in(n, 1), in(n, 2), n.attrs.epsilon, n.stats);
          const double m = n.attrs.momentum;
          for (std::size_t j = 0; j < rmean.size(); ++j) {
            rmean[j] = static_cast<T>(m * static_cast<double>(rmean[j]) + (1.0 - m) * n.stats.mean[j]);
            rvar[j] = static_cast<T>(m * static_cast<double>(rvar[j]) + (1.0 - m) * n.stats.var[j]);
          }
          rcount[0] += T(1);
        } else {
          if (rcount[0] <= T(0))
            throw StateError("batch_norm '" + n.name + "' used for inference before any statistics were recorded");
          n.value = batch_norm_infer(x, in(n, 1), in(n, 2), rmean, rvar, n.attrs.epsilon);
          const std::size_t c = rmean.size();
          n.stats.mean.resize(c);
          n.stats.var.resize(c);
          n.stats.invstd.resize(c);
          for (std::size_t j = 0; j < c; ++j) {
            n.stats.mean[j] = static_cast<double>(rmean[j]);
            n.stats.var[j] = static_cast<double>(rvar[j]);
            n.stats.invstd[j] = 1.0 / std::sqrt(n.stats.var[j] + n.attrs.epsilon);
          }
        }
        break;
      }
      case OpKind::Elu:
        n.value = bnx::elu(in(n, 0), n.attrs.elu_alpha);
        break;
      case OpKind::GlobalAvgPool:
        n.value = bnx::global_avg_pool(in(n, 0));
        break;
      case OpKind::AvgPool2x2:
        n.value = bnx::avg_pool2x2(in(n, 0));
        break;
      case OpKind::ChannelPad:
        n.value = bnx::channel_pad(in(n, 0), n.attrs.channels);
        break;
      case OpKind::Dense:
        n.value = bnx::dense(in(n, 0), in(n, 1), in(n, 2));
        break;
      case OpKind::Softmax:
        n.value = bnx::softmax(in(n, 0));
        break;
      case OpKind::Mapping: {
        const auto& x = in(n, 0);
        n.value = BasicTensor<T>(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = mapping_value(n.attrs.mapping, x[i]);
        break;
      }
      case OpKind::AdaptiveMapping: {
        const auto& x = in(n, 0);
        const T a = scalar_of(n, in(n, 1));
        const T b = scalar_of(n, in(n, 2));
        n.value = BasicTensor<T>(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = breg_value(x[i], a, b);
        break;
      }
      case OpKind::FocalLoss:
        n.value = BasicTensor<T>::scalar(static_cast<T>(bnx::focal_loss(in(n, 0), in(n, 1), n.attrs.focal)));
        break;
      case OpKind::MseLoss:
        n.value = BasicTensor<T>::scalar(static_cast<T>(bnx::mse_loss(in(n, 0), in(n, 1))));
        break;
    }
  } catch (const ShapeError& e) {
    if (e.node() == n.name) throw;
    throw ShapeError(n.name, e.what());
  }
  n.evaluated = true;
  if (finite_check_ && !n.value.all_finite())
    throw NonFiniteError(n.name, std::string(op_name(n.op)) + " produced NaN/Inf");
}

template <typename T>
void BasicGraph<T>::evaluate(BasicParamStore<T>& store, const Feeds<T>& feeds, std::span<const NodeId> targets,
                             Mode mode) {
  std::vector<char> needed(nodes_.size(), targets.empty() ? 1 : 0);
  for (NodeId t : targets) needed.at(t.index) = 1;
  for (std::size_t i = nodes_.size(); i-- > 0;)
    if (needed[i])
      for (NodeId p : nodes_[i].inputs) needed[p.index] = 1;
  for (auto& n : nodes_) {
    n.evaluated = false;
    n.grad = BasicTensor<T>();
  }
  last_mode_ = mode;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (needed[i]) forward_node(nodes_[i], store, feeds, mode);
}

template <typename T>
std::vector<BasicTensor<T>> BasicGraph<T>::run(BasicParamStore<T>& store, const Feeds<T>& feeds,
                                               std::span<const NodeId> targets, Mode mode) {
  evaluate(store, feeds, targets, mode);
  std::vector<BasicTensor<T>> out;
  out.reserve(targets.size());
  for (NodeId t : targets) out.push_back(value(t));
  return out;
}

template <typename T>
BasicTensor<T>& BasicGraph<T>::grad_slot(NodeId id) {
  auto& n = nodes_[id.index];
  if (n.grad.shape() != n.value.shape()) n.grad = BasicTensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
void BasicGraph<T>::backward_node(GraphNode<T>& n, BasicParamStore<T>& store) {
  const BasicTensor<T>& g = n.grad;
  auto input_grad = [&](std::size_t i) -> BasicTensor<T>& { return grad_slot(n.inputs[i]); };
  switch (n.op) {
    case OpKind::Placeholder:
      break;
    case OpKind::Parameter: {
      auto& dst = store[n.attrs.param].grad;
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
      break;
    }
    case OpKind::Identity: {
      auto& gx = input_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      break;
    }
    case OpKind::Add: {
      auto& ga = input_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      auto& gb = input_grad(1);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      break;
    }
    case OpKind::Mul: {
      const auto& a = in(n, 0);
      const auto& b = in(n, 1);
      auto& ga = input_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      auto& gb = input_grad(1);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      break;
    }
    case OpKind::Square: {
      const auto& x = in(n, 0);
      auto& gx = input_grad(0);
      for (std::size_t i = 0; i < x.size(); ++i) gx[i] += T(2) * x[i] * g[i];
      break;
    }
    case OpKind::Sum:
    case OpKind::Mean: {
      auto& gx = input_grad(0);
      T v = g[0];
      if (n.op == OpKind::Mean) v /= static_cast<T>(std::max<std::size_t>(1, gx.size()));
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += v;
      break;
    }
    case OpKind::Conv2d:
      conv2d_backward(in(n, 0), in(n, 1), n.attrs.stride, n.attrs.padding, g, &input_grad(0), &input_grad(1));
      break;
    case OpKind::BatchNorm:
      batch_norm_backward(in(n, 0), in(n, 1), n.stats, last_mode_, g, &input_grad(0), &input_grad(1),
                          &input_grad(2));
      break;
    case OpKind::Elu:
      elu_backward(in(n, 0), n.value, n.attrs.elu_alpha, g, input_grad(0));
      break;
    case OpKind::GlobalAvgPool:
      global_avg_pool_backward(in(n, 0).shape(), g, input_grad(0));
      break;
    case OpKind::AvgPool2x2:
      avg_pool2x2_backward(in(n, 0).shape(), g, input_grad(0));
      break;
    case OpKind::ChannelPad:
      channel_pad_backward(g, input_grad(0));
      break;
    case OpKind::Dense:
      dense_backward(in(n, 0), in(n, 1), g, &input_grad(0), &input_grad(1), &input_grad(2));
      break;
    case OpKind::Softmax:
      softmax_backward(n.value, g, input_grad(0));
      break;
    case OpKind::Mapping: {
      const auto& x = in(n, 0);
      auto& gx = input_grad(0);
      for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * mapping_slope(n.attrs.mapping, x[i]);
      break;
    }
    case OpKind::AdaptiveMapping: {
      const auto& x = in(n, 0);
      const T a = in(n, 1)[0];
      const T b = in(n, 2)[0];
      auto& gx = input_grad(0);
      double da = 0.0, db = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        gx[i] += g[i] * breg_slope(x[i], a, b);
        const auto d = breg_partials<T>(x[i], a, b, n.value[i]);
        da += static_cast<double>(g[i]) * static_cast<double>(d.dalpha);
        db += static_cast<double>(g[i]) * static_cast<double>(d.dbeta);
      }
      input_grad(1)[0] += static_cast<T>(da);
      input_grad(2)[0] += static_cast<T>(db);
      break;
    }
    case OpKind::FocalLoss: {
      const auto d = focal_loss_grad(in(n, 0), in(n, 1), n.attrs.focal);
      auto& gp = input_grad(0);
      for (std::size_t i = 0; i < d.size(); ++i) gp[i] += g[0] * d[i];
      break;
    }
    case OpKind::MseLoss: {
      const auto d = mse_loss_grad(in(n, 0), in(n, 1));
      auto& gp = input_grad(0);
      for (std::size_t i = 0; i < d.size(); ++i) gp[i] += g[0] * d[i];
      auto& gt = input_grad(1);
      for (std::size_t i = 0; i < d.size(); ++i) gt[i] -= g[0] * d[i];
      break;
    }
  }
}

template <typename T>
void BasicGraph<T>::backward(BasicParamStore<T>& store, NodeId loss) {
  auto& l = node(loss);
  if (!l.evaluated) throw StateError("backward called before the loss node '" + l.name + "' was evaluated");
  if (l.value.size() != 1) throw ShapeError(l.name, "loss must be scalar, got " + shape_str(l.value.shape()));
  store.zero_grads();
  std::vector<char> reach(nodes_.size(), 0);
  reach[loss.index] = 1;
  for (std::size_t i = loss.index + 1; i-- > 0;)
    if (reach[i])
      for (NodeId p : nodes_[i].inputs) reach[p.index] = 1;
  for (auto& n : nodes_) n.grad = BasicTensor<T>();
  grad_slot(loss).fill(T(1));
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!reach[i] || !n.evaluated) continue;
    grad_slot(NodeId{static_cast<std::uint32_t>(i)});
    backward_node(n, store);
    if (!keep_grads_ && n.op != OpKind::Parameter && n.op != OpKind::Placeholder) n.grad = BasicTensor<T>();
  }
  store.set_grads_fresh(true);
}

template <typename T>
std::optional<std::string> BasicGraph<T>::first_non_finite() const {
  for (const auto& n : nodes_)
    if (n.evaluated && !n.value.all_finite()) return n.name;
  return std::nullopt;
}

template class BasicGraph<float>;
template class BasicGraph<double>;

}  // namespace bnx
