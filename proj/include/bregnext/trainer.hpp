#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bregnext/augment.hpp"
#include "bregnext/data.hpp"
#include "bregnext/network.hpp"
#include "bregnext/optimizer.hpp"

namespace bnx {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double loss = 0.0;    // mean over samples
  double metric = 0.0;  // accuracy (categorical) or RMSE (dimensional), train mode
  std::vector<double> alpha;  // per adaptive unit, after the epoch
  std::vector<double> beta;
};

struct TrainingLog {
  HeadKind head = HeadKind::Categorical;
  std::vector<std::string> units;  // adaptive units, column order
  std::vector<EpochRecord> epochs;

  /// epoch,lr,loss,accuracy|rmse,alpha_<unit>...,beta_<unit>...
  /// Reals use 17 significant digits, so equal logs mean bitwise-equal values.
  std::string to_csv() const;
  /// Largest |alpha - 1| over units in the last epoch (0 with no epochs).
  double max_alpha_drift() const;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  std::uint64_t seed = 1;
  AdamConfig adam;
  AugmentConfig augment;
  bool finite_check = true;
  std::function<void(const EpochRecord&)> on_epoch;

  void validate() const;
};

/// Inputs (N,64,64,3), zero-centred with the model's stored channel means.
Tensor make_inputs(const Model& model, const Dataset& data, std::span<const std::size_t> indices,
                   const AugmentConfig* augment = nullptr, Rng* rng = nullptr);
/// Labels (N) or targets (N,2) according to the model head.
Tensor make_answers(const Model& model, const Dataset& data, std::span<const std::size_t> indices);

/// Shuffled mini-batches over every sample of `data` (the caller chooses the
/// split); the final partial batch is kept. Before the first step the
/// training-set channel means are written into the model. A non-finite loss
/// throws NonFiniteError naming the first offending node.
TrainingLog train_epochs(Model& model, const Dataset& data, const TrainConfig& cfg);

/// Inference-mode outputs for every sample: probabilities (N,K) or (N,2).
Tensor predict_dataset(Model& model, const Dataset& data, std::size_t batch_size = 64);

}  // namespace bnx
