#pragma once

// Evaluation metrics. Series statistics are computed in double with
// population (1/n) moments.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace bnx {

/// Throw DataError on empty or unequal-length series.
double rmse(std::span<const double> pred, std::span<const double> truth);
/// Pearson correlation; DegenerateSeriesError when either series is constant.
double cc(std::span<const double> pred, std::span<const double> truth);
/// 2 rho s1 s2 / (s1^2 + s2^2 + (m1 - m2)^2); same degenerate rule as cc.
double ccc(std::span<const double> pred, std::span<const double> truth);
/// Fraction of indices with sign(pred) == sign(truth), where sign(0) = 0.
double sagr(std::span<const double> pred, std::span<const double> truth);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // ground-truth count
  std::size_t predicted = 0;  // prediction count
  bool degenerate = false;    // absent from ground truth or never predicted; the undefined ratio is 0
};

struct ClassReport {
  std::size_t classes = 0;
  std::vector<ClassMetrics> per_class;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][prediction]
  double accuracy = 0.0;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;

  std::string to_csv(const std::vector<std::string>& names = {}) const;
  std::string confusion_csv(const std::vector<std::string>& names = {}) const;
  std::string to_text(const std::vector<std::string>& names = {}) const;
};

/// Indices must lie in [0, classes); DataError otherwise.
ClassReport class_report(std::span<const int> pred, std::span<const int> truth, std::size_t classes);

/// Counts of pred - truth over `bins` uniform bins on [-2, 2]; values
/// outside are clipped into the end bins.
std::vector<std::size_t> error_histogram(std::span<const double> pred, std::span<const double> truth,
                                         std::size_t bins = 40);
std::string histogram_csv(const std::vector<std::size_t>& counts);

struct DimensionMetrics {
  std::string name;
  double rmse = 0.0, cc = 0.0, ccc = 0.0, sagr = 0.0;
  bool degenerate = false;  // cc/ccc undefined, reported as NaN
};

/// Valence and arousal columns of (N,2) row-major predictions and targets.
std::vector<DimensionMetrics> dimensional_report(std::span<const double> pred, std::span<const double> truth);
std::string dimensional_csv(const std::vector<DimensionMetrics>& report);
std::string dimensional_text(const std::vector<DimensionMetrics>& report);

}  // namespace bnx
