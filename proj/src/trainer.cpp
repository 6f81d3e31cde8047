#include "bregnext/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "bregnext/error.hpp"

namespace bnx {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::size_t> adaptive_units(const Model& model) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < model.units.size(); ++i)
    if (model.units[i].alpha != kNoIndex) out.push_back(i);
  return out;
}

void check_compatible(const Model& model, const Dataset& data) {
  if (model.config.head == HeadKind::Categorical) {
    if (data.num_classes > model.config.num_classes)
      throw DataError("dataset has " + std::to_string(data.num_classes) + " classes, model head " +
                      std::to_string(model.config.num_classes));
  } else if (!data.has_dimensional) {
    throw DataError("dimensional head needs valence/arousal labels");
  }
}

}  // namespace

std::string TrainingLog::to_csv() const {
  std::string out = "epoch,lr,loss,";
  out += head == HeadKind::Categorical ? "accuracy" : "rmse";
  for (const auto& u : units) out += ",alpha_" + u;
  for (const auto& u : units) out += ",beta_" + u;
  out += "\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + num(e.lr) + "," + num(e.loss) + "," + num(e.metric);
    for (double a : e.alpha) out += "," + num(a);
    for (double b : e.beta) out += "," + num(b);
    out += "\n";
  }
  return out;
}

double TrainingLog::max_alpha_drift() const {
  double drift = 0.0;
  if (epochs.empty()) return drift;
  for (double a : epochs.back().alpha) drift = std::max(drift, std::abs(a - 1.0));
  return drift;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  adam.validate();
  augment.validate();
}

Tensor make_inputs(const Model& model, const Dataset& data, std::span<const std::size_t> indices,
                   const AugmentConfig* augment, Rng* rng) {
  Tensor batch(Shape{indices.size(), kImageSide, kImageSide, kImageChannels});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& s = data.samples.at(indices[i]);
    float* dst = batch.raw() + i * kImageValues;
    if (augment && rng && augment->probability > 0.0) {
      const Tensor img = bnx::augment(s.image(), *augment, *rng);
      std::copy(img.raw(), img.raw() + kImageValues, dst);
    } else {
      s.write_image(dst);
    }
  }
  const auto& means = model.params[model.channel_means].value;
  std::vector<double> m(means.data().begin(), means.data().end());
  zero_center(batch, m);
  return batch;
}

Tensor make_answers(const Model& model, const Dataset& data, std::span<const std::size_t> indices) {
  if (model.config.head == HeadKind::Categorical) {
    Tensor labels(Shape{indices.size()});
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const int l = data.samples.at(indices[i]).label;
      if (l < 0) throw DataError("sample " + std::to_string(indices[i]) + " has no class label");
      labels[i] = static_cast<float>(l);
    }
    return labels;
  }
  Tensor targets(Shape{indices.size(), 2});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& va = data.samples.at(indices[i]).valence_arousal;
    targets[2 * i] = va[0];
    targets[2 * i + 1] = va[1];
  }
  return targets;
}

TrainingLog train_epochs(Model& model, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  TrainingLog log;
  log.head = model.config.head;
  const auto adaptive = adaptive_units(model);
  for (auto i : adaptive) log.units.push_back(model.units[i].name);
  if (cfg.epochs == 0) return log;
  if (data.empty()) throw DataError("training set is empty");
  check_compatible(model, data);

  const auto means = data.channel_means();
  auto& stored = model.params[model.channel_means].value;
  for (std::size_t c = 0; c < 3; ++c) stored[c] = static_cast<float>(means[c]);

  auto opt = make_optimizer(model.params, cfg.adam);
  model.graph.set_finite_check(cfg.finite_check);
  model.graph.set_keep_intermediate_grads(false);
  const bool categorical = model.config.head == HeadKind::Categorical;

  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = Rng::derive(cfg.seed, 2 * epoch);
    Rng augment_rng = Rng::derive(cfg.seed, 2 * epoch + 1);
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    const double lr = lr_at_epoch(epoch, opt);

    double loss_sum = 0.0, metric_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, n);
      const Tensor inputs = make_inputs(model, data, idx, &cfg.augment, &augment_rng);
      const Tensor answers = make_answers(model, data, idx);

      const double loss = model.loss_value(inputs, answers, Mode::Train);
      if (!std::isfinite(loss)) {
        const auto node = model.graph.first_non_finite().value_or("loss");
        throw NonFiniteError(node, "loss became non-finite in epoch " + std::to_string(epoch + 1));
      }
      const auto& out = model.graph.value(categorical ? model.probs : model.output);
      if (categorical) {
        const std::size_t k = out.dim(1);
        for (std::size_t i = 0; i < n; ++i) {
          const float* row = out.raw() + i * k;
          const auto best = static_cast<std::size_t>(std::max_element(row, row + k) - row);
          metric_sum += best == static_cast<std::size_t>(answers[i]) ? 1.0 : 0.0;
        }
      } else {
        for (std::size_t i = 0; i < 2 * n; ++i) {
          const double d = static_cast<double>(out[i]) - static_cast<double>(answers[i]);
          metric_sum += d * d;
        }
      }
      model.graph.backward(model.params, model.loss);
      adam_step(model.params, opt, lr);
      loss_sum += loss * static_cast<double>(n);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    const auto total = static_cast<double>(order.size());
    rec.loss = loss_sum / total;
    rec.metric = categorical ? metric_sum / total : std::sqrt(metric_sum / (2.0 * total));
    for (auto i : adaptive) {
      const auto p = model.mapping_params(i);
      rec.alpha.push_back(p.alpha);
      rec.beta.push_back(p.beta);
    }
    if (cfg.on_epoch) cfg.on_epoch(rec);
    log.epochs.push_back(std::move(rec));
  }
  return log;
}

Tensor predict_dataset(Model& model, const Dataset& data, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  const std::size_t k = model.config.outputs();
  Tensor out(Shape{data.size(), k});
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, data.size() - start);
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor inputs = make_inputs(model, data, idx);
    const Tensor pred = model.predict(inputs, Mode::Infer);
    std::copy(pred.raw(), pred.raw() + n * k, out.raw() + start * k);
  }
  return out;
}

}  // namespace bnx
