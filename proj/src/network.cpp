#include "bregnext/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace bnx {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

NetworkConfig make(std::string name, StemConfig stem, std::vector<StageConfig> stages, MappingKind bypass) {
  NetworkConfig cfg;
  cfg.name = std::move(name);
  cfg.stem = stem;
  cfg.stages = std::move(stages);
  cfg.bypass = bypass;
  return cfg;
}

std::vector<StageConfig> breg_stages(std::size_t a, std::size_t b, std::size_t c) {
  return {{a, 32, false}, {1, 64, true}, {b, 64, false}, {1, 128, true}, {c, 128, false}};
}

template <typename T>
BasicTensor<T> he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  BasicTensor<T> t(std::move(shape));
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.normal(0.0, stddev));
  return t;
}

template <typename T>
NodeId add_conv(BasicGraph<T>& g, BasicParamStore<T>& store, const std::string& owner, NodeId x, std::size_t cin,
                std::size_t cout, std::size_t k, std::size_t stride, Rng& rng) {
  const auto idx = store.add(owner + "/kernel", owner, ParamRole::ConvKernel, true,
                             he_normal<T>(Shape{k, k, cin, cout}, k * k * cin, rng));
  return g.conv2d(x, g.parameter(store, idx), stride, Padding::Same, owner);
}

template <typename T>
NodeId add_bn(BasicGraph<T>& g, BasicParamStore<T>& store, const std::string& owner, NodeId x, std::size_t c) {
  const auto gamma = store.add(owner + "/gamma", owner, ParamRole::BnGamma, true, BasicTensor<T>(Shape{c}, T(1)));
  const auto beta = store.add(owner + "/beta", owner, ParamRole::BnBeta, true, BasicTensor<T>(Shape{c}, T(0)));
  const auto mean = store.add(owner + "/running_mean", owner, ParamRole::BnRunningMean, false, BasicTensor<T>(Shape{c}, T(0)));
  const auto var = store.add(owner + "/running_var", owner, ParamRole::BnRunningVar, false, BasicTensor<T>(Shape{c}, T(1)));
  const auto count = store.add(owner + "/stat_count", owner, ParamRole::BnStatCount, false, BasicTensor<T>(Shape{1}, T(0)));
  return g.batch_norm(x, g.parameter(store, gamma), g.parameter(store, beta), mean, var, count, 1e-5, 0.99, owner);
}

}  // namespace

const char* head_name(HeadKind head) { return head == HeadKind::Categorical ? "categorical" : "dimensional"; }

HeadKind head_from_name(const std::string& name) {
  const auto n = lower(name);
  if (n == "categorical") return HeadKind::Categorical;
  if (n == "dimensional") return HeadKind::Dimensional;
  throw ConfigError("unknown head '" + name + "' (categorical|dimensional)");
}

void NetworkConfig::validate() const {
  if (stages.empty()) throw ConfigError(name + ": empty stage list");
  if (input_channels == 0 || stem.channels == 0 || stem.kernel == 0 || stem.stride == 0)
    throw ConfigError(name + ": zero-sized stem or input");
  if (head == HeadKind::Categorical && num_classes < 2) throw ConfigError(name + ": need at least two classes");
  std::size_t width = stem.channels;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    if (s.units == 0 || s.channels == 0) throw ConfigError(name + ": stage " + std::to_string(i) + " is empty");
    if (s.channels < width) throw ConfigError(name + ": stage widths must be non-decreasing");
    if (!s.transition && s.channels != width)
      throw ConfigError(name + ": stage " + std::to_string(i) + " changes width without a transition");
    width = s.channels;
  }
  for (const auto& u : unit_configs(*this)) u.validate();
}

std::size_t NetworkConfig::unit_count() const {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.units;
  return n;
}

std::vector<std::size_t> NetworkConfig::unit_counts() const {
  std::vector<std::size_t> out;
  for (const auto& s : stages) out.push_back(s.units);
  return out;
}

void ResidualUnitConfig::validate() const {
  if (stride != 1 && stride != 2) throw ConfigError(name + ": stride must be 1 or 2");
  if (in_channels == 0 || out_channels == 0) throw ConfigError(name + ": zero channels");
  if (stride == 1 && in_channels != out_channels)
    throw ConfigError(name + ": channel mismatch after bypass (" + std::to_string(in_channels) + " -> " +
                      std::to_string(out_channels) + " without a transition)");
  if (out_channels < in_channels) throw ConfigError(name + ": transition units cannot reduce channels");
}

std::vector<ResidualUnitConfig> unit_configs(const NetworkConfig& cfg) {
  std::vector<ResidualUnitConfig> out;
  std::size_t width = cfg.stem.channels;
  for (const auto& s : cfg.stages) {
    for (std::size_t u = 0; u < s.units; ++u) {
      ResidualUnitConfig uc;
      uc.name = "unit" + std::to_string(out.size() + 1);
      uc.in_channels = width;
      uc.out_channels = s.channels;
      uc.stride = (u == 0 && s.transition) ? 2 : 1;
      uc.bypass = cfg.bypass;
      out.push_back(uc);
      width = s.channels;
    }
  }
  return out;
}

const std::vector<std::string>& named_architectures() {
  static const std::vector<std::string> names{"ResNet-32",   "ResNet-50",    "BReG-Net-32",
                                              "BReG-Net-50", "BReG-NeXt-32", "BReG-NeXt-50"};
  return names;
}

NetworkConfig named_config(const std::string& name) {
  const auto n = lower(name);
  const StemConfig resnet_stem{64, 3, 2};
  const StemConfig breg_stem{32, 3, 1};
  if (n == "resnet-32")
    return make("ResNet-32", resnet_stem, {{3, 64, false}, {3, 128, true}, {5, 256, true}, {3, 512, true}},
                MappingKind::identity());
  if (n == "resnet-50")
    return make("ResNet-50", resnet_stem,
                {{8, 64, false}, {1, 128, true}, {7, 128, false}, {1, 256, true}, {7, 256, false}},
                MappingKind::identity());
  if (n == "breg-net-32") return make("BReG-Net-32", breg_stem, breg_stages(5, 4, 4), MappingKind::h1());
  if (n == "breg-net-50") return make("BReG-Net-50", breg_stem, breg_stages(8, 7, 7), MappingKind::h1());
  if (n == "breg-next-32") return make("BReG-NeXt-32", breg_stem, breg_stages(4, 5, 4), MappingKind::adaptive());
  if (n == "breg-next-50") return make("BReG-NeXt-50", breg_stem, breg_stages(7, 8, 7), MappingKind::adaptive());
  throw ConfigError("unknown architecture '" + name + "'");
}

const std::vector<std::size_t>& depth_series() {
  static const std::vector<std::size_t> series{26, 32, 38, 44, 50, 56, 62, 68};
  return series;
}

NetworkConfig depth_config(std::size_t layers) {
  const auto& s = depth_series();
  if (std::find(s.begin(), s.end(), layers) == s.end())
    throw ConfigError("depth " + std::to_string(layers) + " is not in the series 26..68 (step 6)");
  const std::size_t k = (layers - 26) / 6;
  return make("BReG-NeXt-" + std::to_string(layers), StemConfig{32, 3, 1}, breg_stages(3 + k, 4 + k, 3 + k),
              MappingKind::adaptive());
}

NetworkConfig architecture_config(const std::string& name) {
  const auto n = lower(name);
  const std::string prefix = "breg-next-";
  if (n.starts_with(prefix) && n != "breg-next-32" && n != "breg-next-50") {
    const auto digits = n.substr(prefix.size());
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(c); }))
      return depth_config(static_cast<std::size_t>(std::stoul(digits)));
  }
  return named_config(name);
}

NetworkConfig non_adaptive(NetworkConfig cfg) {
  cfg.bypass = MappingKind::h1();
  cfg.name += " (non-adaptive)";
  return cfg;
}

template <typename T>
UnitHandles build_unit(BasicGraph<T>& g, BasicParamStore<T>& store, const ResidualUnitConfig& cfg, NodeId input,
                       Rng& rng) {
  cfg.validate();
  UnitHandles h;
  h.name = cfg.name;
  h.input = input;
  const auto& p = cfg.name;

  NodeId x = add_bn(g, store, p + "/bn1", input, cfg.in_channels);
  x = g.elu(x, 1.0, p + "/elu1");
  x = add_conv(g, store, p + "/conv1", x, cfg.in_channels, cfg.out_channels, 3, cfg.stride, rng);
  h.convs.push_back(x);
  x = add_bn(g, store, p + "/bn2", x, cfg.out_channels);
  x = g.elu(x, 1.0, p + "/elu2");
  x = add_conv(g, store, p + "/conv2", x, cfg.out_channels, cfg.out_channels, 3, 1, rng);
  h.convs.push_back(x);
  h.branch = x;

  NodeId b = input;
  switch (cfg.bypass.tag()) {
    case MappingKind::Tag::Identity:
      break;
    case MappingKind::Tag::Adaptive: {
      h.alpha = store.add(p + "/alpha", p, ParamRole::MappingAlpha, true, BasicTensor<T>::scalar(T(1)));
      h.beta = store.add(p + "/beta", p, ParamRole::MappingBeta, true, BasicTensor<T>::scalar(T(0)));
      b = g.adaptive_mapping(input, g.parameter(store, h.alpha), g.parameter(store, h.beta), p + "/bypass");
      break;
    }
    default:
      b = g.mapping(input, cfg.bypass, p + "/bypass");
  }
  if (cfg.stride == 2) b = g.avg_pool2x2(b, p + "/bypass_pool");
  if (cfg.out_channels > cfg.in_channels) b = g.channel_pad(b, cfg.out_channels, p + "/bypass_pad");
  h.bypass = b;
  h.output = g.add(b, h.branch, p + "/sum");
  return h;
}

template <typename T>
BasicModel<T> build_network(const NetworkConfig& cfg, std::uint64_t seed, const FocalLossConfig& focal) {
  cfg.validate();
  Rng rng(seed);
  BasicModel<T> m;
  m.config = cfg;
  auto& g = m.graph;
  auto& store = m.params;

  m.channel_means = store.add("input/channel_means", "input", ParamRole::InputMeans, false,
                              BasicTensor<T>(Shape{cfg.input_channels}, T(0)));
  m.input = g.placeholder("input", Shape{0, 0, 0, cfg.input_channels});
  m.stem = add_conv(g, store, "stem", m.input, cfg.input_channels, cfg.stem.channels, cfg.stem.kernel,
                    cfg.stem.stride, rng);
  m.conv_outputs.push_back(m.stem);

  NodeId x = m.stem;
  for (const auto& uc : unit_configs(cfg)) {
    auto h = build_unit(g, store, uc, x, rng);
    m.conv_outputs.insert(m.conv_outputs.end(), h.convs.begin(), h.convs.end());
    x = h.output;
    m.units.push_back(std::move(h));
  }
  m.features = x;
  m.pooled = g.global_avg_pool(x, "pool");

  const std::size_t width = cfg.stages.back().channels;
  const std::size_t k = cfg.outputs();
  const auto w = store.add("head/weights", "head", ParamRole::DenseWeight, true,
                           he_normal<T>(Shape{width, k}, width, rng));
  const auto b = store.add("head/bias", "head", ParamRole::DenseBias, true, BasicTensor<T>(Shape{k}, T(0)));
  m.output = g.dense(m.pooled, g.parameter(store, w), g.parameter(store, b), "head");
  if (cfg.head == HeadKind::Categorical) {
    m.probs = g.softmax(m.output, "probs");
    m.labels = g.placeholder("labels", Shape{0});
    m.loss = g.focal_loss(m.probs, m.labels, focal, "loss");
  } else {
    m.targets = g.placeholder("targets", Shape{0, 2});
    m.loss = g.mse_loss(m.output, m.targets, "loss");
  }
  return m;
}

template <typename T>
Feeds<T> BasicModel<T>::feeds_for(const BasicTensor<T>& batch, const BasicTensor<T>* answers) const {
  Feeds<T> feeds;
  feeds.emplace("input", batch);
  if (answers) feeds.emplace(config.head == HeadKind::Categorical ? "labels" : "targets", *answers);
  return feeds;
}

template <typename T>
BasicTensor<T> BasicModel<T>::forward(const BasicTensor<T>& batch, Mode mode) {
  const NodeId targets_[] = {output};
  return std::move(graph.run(params, feeds_for(batch, nullptr), targets_, mode).front());
}

template <typename T>
BasicTensor<T> BasicModel<T>::predict(const BasicTensor<T>& batch, Mode mode) {
  const NodeId t[] = {config.head == HeadKind::Categorical ? probs : output};
  return std::move(graph.run(params, feeds_for(batch, nullptr), t, mode).front());
}

template <typename T>
double BasicModel<T>::loss_value(const BasicTensor<T>& batch, const BasicTensor<T>& answers, Mode mode) {
  const NodeId t[] = {loss};
  graph.evaluate(params, feeds_for(batch, &answers), t, mode);
  return static_cast<double>(graph.value(loss)[0]);
}

template <typename T>
double BasicModel<T>::loss_and_gradients(const BasicTensor<T>& batch, const BasicTensor<T>& answers, Mode mode) {
  const double l = loss_value(batch, answers, mode);
  graph.backward(params, loss);
  return l;
}

template <typename T>
MappingParams BasicModel<T>::mapping_params(std::size_t unit) const {
  const auto& u = units.at(unit);
  MappingParams p;
  p.unit = u.name;
  if (u.alpha != kNoIndex) {
    p.alpha = static_cast<double>(params[u.alpha].value[0]);
    p.beta = static_cast<double>(params[u.beta].value[0]);
  }
  return p;
}

template <typename T>
void BasicModel<T>::set_mapping_params(double alpha, double beta) {
  for (const auto& u : units) {
    if (u.alpha == kNoIndex) continue;
    params[u.alpha].value[0] = static_cast<T>(alpha);
    params[u.beta].value[0] = static_cast<T>(beta);
  }
}

template <typename T>
CostReport count_parameters(const BasicModel<T>& model) {
  CostReport r;
  std::map<std::string, std::size_t> slot;
  for (const auto& e : model.params.entries()) {
    if (!e.trainable) continue;
    auto [it, fresh] = slot.emplace(e.owner, r.layers.size());
    if (fresh) r.layers.push_back({e.owner, 0, 0});
    r.layers[it->second].parameters += e.value.size();
    r.parameters += e.value.size();
  }
  return r;
}

CostReport count_flops(const NetworkConfig& cfg, std::size_t height, std::size_t width) {
  cfg.validate();
  CostReport r;
  auto push = [&](std::string name, std::uint64_t flops) {
    r.layers.push_back({std::move(name), 0, flops});
    r.flops += flops;
  };
  auto conv = [](std::size_t h, std::size_t w, std::size_t k, std::size_t cin, std::size_t cout) {
    return std::uint64_t{2} * h * w * k * k * cin * cout;
  };
  auto down = [](std::size_t v, std::size_t s) { return (v + s - 1) / s; };

  std::size_t h = down(height, cfg.stem.stride), w = down(width, cfg.stem.stride);
  push("stem", conv(h, w, cfg.stem.kernel, cfg.input_channels, cfg.stem.channels));
  for (const auto& u : unit_configs(cfg)) {
    const std::uint64_t in_elems = std::uint64_t{h} * w * u.in_channels;
    const std::size_t oh = down(h, u.stride), ow = down(w, u.stride);
    const std::uint64_t out_elems = std::uint64_t{oh} * ow * u.out_channels;
    std::uint64_t f = 0;
    f += 2 * in_elems + in_elems;                                // bn1 + elu1
    f += conv(oh, ow, 3, u.in_channels, u.out_channels);         // conv1
    f += 2 * out_elems + out_elems;                              // bn2 + elu2
    f += conv(oh, ow, 3, u.out_channels, u.out_channels);        // conv2
    if (u.bypass.tag() != MappingKind::Tag::Identity) f += in_elems;
    if (u.stride == 2) f += in_elems;                            // bypass pooling
    f += out_elems;                                              // sum
    push(u.name, f);
    h = oh;
    w = ow;
  }
  const std::size_t c = cfg.stages.back().channels;
  push("pool", std::uint64_t{h} * w * c);
  const std::size_t k = cfg.outputs();
  std::uint64_t head = std::uint64_t{2} * c * k + k;
  if (cfg.head == HeadKind::Categorical) head += 3 * k;
  push("head", head);
  return r;
}

template <typename T>
CostReport count_flops(const BasicModel<T>& model, const Shape& input_hwc) {
  if (input_hwc.size() != 3 || input_hwc[2] != model.config.input_channels)
    throw ShapeError("input", "expected (H,W," + std::to_string(model.config.input_channels) + "), got " +
                                  shape_str(input_hwc));
  return count_flops(model.config, input_hwc[0], input_hwc[1]);
}

CostReport cost_report(const NetworkConfig& cfg) {
  const auto model = build_network<float>(cfg, 0);
  auto params = count_parameters(model);
  auto flops = count_flops(cfg, cfg.input_height, cfg.input_width);
  std::map<std::string, std::uint64_t> p;
  for (const auto& l : params.layers) {
    // fold unit3/bn1, unit3/conv1, ... onto unit3
    const auto slash = l.layer.find('/');
    p[slash == std::string::npos ? l.layer : l.layer.substr(0, slash)] += l.parameters;
  }
  for (auto& l : flops.layers) l.parameters = p.contains(l.layer) ? p[l.layer] : 0;
  flops.parameters = params.parameters;
  return flops;
}

template UnitHandles build_unit(BasicGraph<float>&, BasicParamStore<float>&, const ResidualUnitConfig&, NodeId, Rng&);
template UnitHandles build_unit(BasicGraph<double>&, BasicParamStore<double>&, const ResidualUnitConfig&, NodeId,
                                Rng&);
template struct BasicModel<float>;
template struct BasicModel<double>;
template BasicModel<float> build_network(const NetworkConfig&, std::uint64_t, const FocalLossConfig&);
template BasicModel<double> build_network(const NetworkConfig&, std::uint64_t, const FocalLossConfig&);
template CostReport count_parameters(const BasicModel<float>&);
template CostReport count_parameters(const BasicModel<double>&);
template CostReport count_flops(const BasicModel<float>&, const Shape&);
template CostReport count_flops(const BasicModel<double>&, const Shape&);

}  // namespace bnx
