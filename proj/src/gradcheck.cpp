#include "bregnext/gradcheck.hpp"

#include <cstdio>

#include "bregnext/random.hpp"

namespace bnx {
namespace {

using GraphD = BasicGraph<double>;
using StoreD = BasicParamStore<double>;

TensorD random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  TensorD t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

std::string coord(const std::string& entry, std::size_t i) { return entry + "[" + std::to_string(i) + "]"; }

void track(GradcheckResult& r, double err, const std::string& where) {
  ++r.checked;
  if (r.worst.empty() || err > r.max_error) {
    r.max_error = err;
    r.worst = where;
  }
}

void merge(GradcheckResult& into, const GradcheckResult& part, const std::string& prefix) {
  if (part.checked && (into.worst.empty() || part.max_error > into.max_error)) {
    into.max_error = part.max_error;
    into.worst = prefix + part.worst;
  }
  into.checked += part.checked;
}

// Scalar helper: central difference of f at x.
template <typename F>
double central(F&& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// A one-op graph: trainable inputs, then loss = sum(op(inputs) * weights)
// with fixed random weights so every output element gets its own upstream value.
struct Harness {
  GraphD g;
  StoreD store;
  Rng rng;
  explicit Harness(std::uint64_t seed) : rng(seed) {}

  NodeId input(const std::string& name, Shape shape, double lo = -1.0, double hi = 1.0) {
    const auto idx = store.add(name, name, ParamRole::Generic, true, random_tensor(std::move(shape), rng, lo, hi));
    return g.parameter(store, idx);
  }
  NodeId weighted_sum(NodeId out, Shape shape) {
    const auto idx = store.add("upstream", "upstream", ParamRole::Generic, false, random_tensor(std::move(shape), rng));
    return g.sum(g.mul(out, g.parameter(store, idx)));
  }
};

}  // namespace

GradcheckResult check_graph(const std::string& category, GraphD& graph, StoreD& store, NodeId loss,
                            const Feeds<double>& feeds, Mode mode, const GradcheckOptions& opts,
                            std::size_t coords_per_entry) {
  GradcheckResult r;
  r.category = category;
  const NodeId targets[] = {loss};
  graph.evaluate(store, feeds, targets, mode);
  graph.backward(store, loss);
  auto loss_at = [&]() {
    graph.evaluate(store, feeds, targets, mode);
    return graph.value(loss)[0];
  };
  Rng rng(opts.seed ^ 0x5eedULL);
  bool any = false;
  for (std::size_t e = 0; e < store.size(); ++e) {
    auto& entry = store[e];
    if (!entry.trainable || entry.value.empty()) continue;
    any = true;
    std::vector<std::size_t> coords;
    if (entry.value.size() <= coords_per_entry) {
      for (std::size_t i = 0; i < entry.value.size(); ++i) coords.push_back(i);
    } else {
      for (std::size_t i = 0; i < coords_per_entry; ++i) coords.push_back(static_cast<std::size_t>(rng.below(entry.value.size())));
    }
    for (auto i : coords) {
      const double orig = entry.value[i];
      entry.value[i] = orig + opts.step;
      const double up = loss_at();
      entry.value[i] = orig - opts.step;
      const double down = loss_at();
      entry.value[i] = orig;
      const double fd = (up - down) / (2.0 * opts.step);
      track(r, relative_error(entry.grad[i], fd, opts.floor), coord(entry.name, i));
    }
  }
  if (!any) r.note = "no parameters";
  return r;
}

GradcheckResult gradcheck_adaptive_mapping(const GradcheckOptions& opts) {
  GradcheckResult r;
  r.category = "adaptive mapping";
  Rng rng(opts.seed);
  const double h = opts.step;
  for (std::size_t s = 0; s < opts.mapping_samples; ++s) {
    const double x = rng.uniform(-4.0, 4.0);
    // keep alpha +- h clear of zero, where H switches to its limit form
    const double alpha = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.05, 3.0);
    const double beta = rng.uniform(-2.0, 2.0);
    const auto p = breg_partials(x, alpha, beta);
    const std::string at = "(x=" + std::to_string(x) + ",a=" + std::to_string(alpha) + ",b=" + std::to_string(beta) + ")";
    track(r, relative_error(breg_slope(x, alpha, beta), central([&](double v) { return breg_value(v, alpha, beta); }, x, h), opts.floor),
          "dH/dx" + at);
    track(r, relative_error(p.dalpha, central([&](double v) { return breg_value(x, v, beta); }, alpha, h), opts.floor),
          "dH/dalpha" + at);
    track(r, relative_error(p.dbeta, central([&](double v) { return breg_value(x, alpha, v); }, beta, h), opts.floor),
          "dH/dbeta" + at);
  }
  // The graph node, including accumulation of the scalar gradients over a tensor.
  Harness hs(opts.seed + 1);
  const NodeId x = hs.input("x", Shape{3, 5}, -3.0, 3.0);
  const auto a = hs.store.add("alpha", "unit", ParamRole::MappingAlpha, true, TensorD::scalar(0.7));
  const auto b = hs.store.add("beta", "unit", ParamRole::MappingBeta, true, TensorD::scalar(-0.4));
  const NodeId out = hs.g.adaptive_mapping(x, hs.g.parameter(hs.store, a), hs.g.parameter(hs.store, b));
  const NodeId loss = hs.weighted_sum(out, Shape{3, 5});
  merge(r, check_graph(r.category, hs.g, hs.store, loss, {}, Mode::Train, opts, opts.coords_per_entry), "graph ");
  return r;
}

GradcheckResult gradcheck_fixed_mappings(const GradcheckOptions& opts, std::optional<MappingKind> only) {
  GradcheckResult r;
  r.category = only ? "mapping " + only->to_string() : "fixed mappings";
  std::vector<MappingKind> kinds;
  if (only) kinds.push_back(*only);
  else kinds = {MappingKind::identity(), MappingKind::lambda_scaled(0.9), MappingKind::h1(), MappingKind::h2(),
                MappingKind::h3(1.0), MappingKind::h3(0.5)};
  Rng rng(opts.seed + 7);
  for (const auto& kind : kinds) {
    if (kind.tag() == MappingKind::Tag::Adaptive) {
      merge(r, gradcheck_adaptive_mapping(opts), "");
      continue;
    }
    for (std::size_t s = 0; s < opts.mapping_samples; ++s) {
      const double x = rng.uniform(-6.0, 6.0);
      const double fd = central([&](double v) { return mapping_value(kind, v); }, x, opts.step);
      track(r, relative_error(mapping_slope(kind, x), fd, opts.floor),
            kind.to_string() + "'(" + std::to_string(x) + ")");
    }
    Harness hs(opts.seed + 11);
    const NodeId x = hs.input("x", Shape{4, 4}, -3.0, 3.0);
    const NodeId loss = hs.weighted_sum(hs.g.mapping(x, kind), Shape{4, 4});
    merge(r, check_graph(r.category, hs.g, hs.store, loss, {}, Mode::Train, opts, opts.coords_per_entry),
          kind.to_string() + " graph ");
  }
  return r;
}

std::vector<GradcheckResult> gradcheck_primitives(const GradcheckOptions& opts) {
  std::vector<GradcheckResult> out;
  const auto per = opts.coords_per_entry;
  auto run = [&](const std::string& name, auto&& build, Mode mode = Mode::Train) {
    Harness hs(opts.seed + out.size() * 101);
    const NodeId loss = build(hs);
    out.push_back(check_graph(name, hs.g, hs.store, loss, {}, mode, opts, per));
  };

  run("identity", [](Harness& h) { return h.weighted_sum(h.g.identity(h.input("x", {2, 3})), {2, 3}); });
  run("add", [](Harness& h) { return h.weighted_sum(h.g.add(h.input("a", {2, 3}), h.input("b", {2, 3})), {2, 3}); });
  run("mul", [](Harness& h) { return h.weighted_sum(h.g.mul(h.input("a", {2, 3}), h.input("b", {2, 3})), {2, 3}); });
  run("square", [](Harness& h) { return h.weighted_sum(h.g.square(h.input("x", {2, 3})), {2, 3}); });
  run("sum", [](Harness& h) { return h.g.square(h.g.sum(h.input("x", {2, 3}))); });
  run("mean", [](Harness& h) { return h.g.square(h.g.mean(h.input("x", {2, 3}))); });
  run("conv2d same s1", [](Harness& h) {
    return h.weighted_sum(h.g.conv2d(h.input("x", {2, 5, 5, 3}), h.input("k", {3, 3, 3, 4}), 1, Padding::Same),
                          {2, 5, 5, 4});
  });
  run("conv2d same s2", [](Harness& h) {
    return h.weighted_sum(h.g.conv2d(h.input("x", {2, 7, 6, 2}), h.input("k", {3, 3, 2, 3}), 2, Padding::Same),
                          {2, 4, 3, 3});
  });
  run("conv2d valid", [](Harness& h) {
    return h.weighted_sum(h.g.conv2d(h.input("x", {1, 6, 5, 2}), h.input("k", {2, 3, 2, 2}), 1, Padding::Valid),
                          {1, 5, 3, 2});
  });
  auto bn = [](Harness& h) {
    const NodeId x = h.input("x", {3, 2, 2, 4}, -2.0, 2.0);
    const NodeId gamma = h.input("gamma", {4}, 0.5, 1.5);
    const NodeId beta = h.input("beta", {4});
    const auto m = h.store.add("rm", "bn", ParamRole::BnRunningMean, false, random_tensor({4}, h.rng, -0.2, 0.2));
    const auto v = h.store.add("rv", "bn", ParamRole::BnRunningVar, false, random_tensor({4}, h.rng, 0.5, 1.5));
    const auto c = h.store.add("rc", "bn", ParamRole::BnStatCount, false, TensorD::scalar(1.0));
    return h.weighted_sum(h.g.batch_norm(x, gamma, beta, m, v, c, 1e-5, 0.99), {3, 2, 2, 4});
  };
  run("batch_norm train", bn, Mode::Train);
  run("batch_norm infer", bn, Mode::Infer);
  run("elu", [](Harness& h) { return h.weighted_sum(h.g.elu(h.input("x", {4, 5}, -3.0, 3.0)), {4, 5}); });
  run("global_avg_pool", [](Harness& h) { return h.weighted_sum(h.g.global_avg_pool(h.input("x", {2, 3, 3, 2})), {2, 2}); });
  run("avg_pool2x2", [](Harness& h) { return h.weighted_sum(h.g.avg_pool2x2(h.input("x", {2, 5, 4, 2})), {2, 3, 2, 2}); });
  run("channel_pad", [](Harness& h) { return h.weighted_sum(h.g.channel_pad(h.input("x", {1, 2, 2, 2}), 5), {1, 2, 2, 5}); });
  run("dense", [](Harness& h) {
    return h.weighted_sum(h.g.dense(h.input("x", {3, 4}), h.input("w", {4, 2}), h.input("b", {2})), {3, 2});
  });
  run("softmax", [](Harness& h) { return h.weighted_sum(h.g.softmax(h.input("x", {3, 4}, -2.0, 2.0)), {3, 4}); });
  run("focal_loss", [](Harness& h) {
    const NodeId p = h.input("p", {4, 3}, 0.1, 0.9);
    const auto l = h.store.add("labels", "labels", ParamRole::Generic, false, TensorD::vector({0, 2, 1, 2}));
    return h.g.focal_loss(p, h.g.parameter(h.store, l), FocalLossConfig{});
  });
  run("focal_loss over softmax", [](Harness& h) {
    const NodeId p = h.g.softmax(h.input("logits", {4, 3}, -2.0, 2.0));
    const auto l = h.store.add("labels", "labels", ParamRole::Generic, false, TensorD::vector({1, 0, 2, 2}));
    return h.g.focal_loss(p, h.g.parameter(h.store, l), FocalLossConfig{});
  });
  run("mse_loss", [](Harness& h) { return h.g.mse_loss(h.input("pred", {3, 2}), h.input("target", {3, 2})); });
  run("mapping h2", [](Harness& h) { return h.weighted_sum(h.g.mapping(h.input("x", {3, 3}, -3, 3), MappingKind::h2()), {3, 3}); });
  run("adaptive_mapping", [](Harness& h) {
    const NodeId x = h.input("x", {2, 2, 2, 3}, -3.0, 3.0);
    const auto a = h.store.add("alpha", "u", ParamRole::MappingAlpha, true, TensorD::scalar(1.3));
    const auto b = h.store.add("beta", "u", ParamRole::MappingBeta, true, TensorD::scalar(0.6));
    return h.weighted_sum(h.g.adaptive_mapping(x, h.g.parameter(h.store, a), h.g.parameter(h.store, b)), {2, 2, 2, 3});
  });
  return out;
}

GradcheckResult gradcheck_network(NetworkConfig cfg, const GradcheckOptions& opts) {
  cfg.input_height = cfg.input_width = opts.network_image;
  auto model = build_network<double>(cfg, opts.seed);
  Rng rng(opts.seed + 3);
  for (auto& e : model.params.entries()) {
    switch (e.role) {
      case ParamRole::MappingAlpha: e.value[0] = rng.uniform(0.6, 1.4); break;
      // dH/dbeta vanishes at beta = 0, where a relative comparison only measures difference truncation
      case ParamRole::MappingBeta: e.value[0] = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.3, 0.8); break;
      case ParamRole::BnGamma:
        for (auto& v : e.value.data()) v = rng.uniform(0.7, 1.3);
        break;
      case ParamRole::BnBeta:
      case ParamRole::DenseBias:
        for (auto& v : e.value.data()) v = rng.uniform(-0.2, 0.2);
        break;
      default: break;
    }
  }
  const std::size_t n = opts.network_batch;
  TensorD input = random_tensor({n, cfg.input_height, cfg.input_width, cfg.input_channels}, rng);
  TensorD answers;
  if (cfg.head == HeadKind::Categorical) {
    answers = TensorD(Shape{n});
    for (std::size_t i = 0; i < n; ++i) answers[i] = static_cast<double>(rng.below(cfg.num_classes));
  } else {
    answers = random_tensor({n, 2}, rng);
  }
  Feeds<double> feeds{{"input", input}, {cfg.head == HeadKind::Categorical ? "labels" : "targets", answers}};

  // Equal share of the coordinate budget per trainable entry.
  std::size_t trainable = 0;
  for (const auto& e : model.params.entries()) trainable += e.trainable;
  const std::size_t per = trainable ? std::max<std::size_t>(1, opts.network_coords / trainable) : 0;
  return check_graph("network " + cfg.name, model.graph, model.params, model.loss, feeds, Mode::Train, opts, per);
}

}  // namespace bnx
