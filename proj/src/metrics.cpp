#include "bregnext/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "bregnext/error.hpp"

namespace bnx {
namespace {

void check_series(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.empty() || b.empty()) throw DataError(std::string(what) + ": empty series");
  if (a.size() != b.size())
    throw DataError(std::string(what) + ": length mismatch " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
}

struct Moments {
  double mean_a = 0, mean_b = 0, var_a = 0, var_b = 0, cov = 0;
};

Moments moments(std::span<const double> a, std::span<const double> b) {
  Moments m;
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    m.mean_a += a[i];
    m.mean_b += b[i];
  }
  m.mean_a /= n;
  m.mean_b /= n;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - m.mean_a, db = b[i] - m.mean_b;
    m.var_a += da * da;
    m.var_b += db * db;
    m.cov += da * db;
  }
  m.var_a /= n;
  m.var_b /= n;
  m.cov /= n;
  return m;
}

void check_variance(const Moments& m, const char* what) {
  if (!(m.var_a > 0.0) || !(m.var_b > 0.0))
    throw DegenerateSeriesError(std::string(what) + ": zero-variance series");
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string name_of(const std::vector<std::string>& names, std::size_t i) {
  return i < names.size() ? names[i] : std::to_string(i);
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> truth) {
  check_series(pred, truth, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

double cc(std::span<const double> pred, std::span<const double> truth) {
  check_series(pred, truth, "cc");
  const auto m = moments(pred, truth);
  check_variance(m, "cc");
  return std::clamp(m.cov / std::sqrt(m.var_a * m.var_b), -1.0, 1.0);
}

double ccc(std::span<const double> pred, std::span<const double> truth) {
  check_series(pred, truth, "ccc");
  const auto m = moments(pred, truth);
  check_variance(m, "ccc");
  const double gap = m.mean_a - m.mean_b;
  return 2.0 * m.cov / (m.var_a + m.var_b + gap * gap);
}

double sagr(std::span<const double> pred, std::span<const double> truth) {
  check_series(pred, truth, "sagr");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) agree += sign(pred[i]) == sign(truth[i]);
  return static_cast<double>(agree) / static_cast<double>(pred.size());
}

ClassReport class_report(std::span<const int> pred, std::span<const int> truth, std::size_t classes) {
  if (pred.size() != truth.size()) throw DataError("class_report: length mismatch");
  if (classes == 0) throw DataError("class_report: zero classes");
  ClassReport r;
  r.classes = classes;
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  const auto check = [classes](int v) {
    if (v < 0 || static_cast<std::size_t>(v) >= classes)
      throw DataError("class index " + std::to_string(v) + " outside [0," + std::to_string(classes) + ")");
    return static_cast<std::size_t>(v);
  };
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = check(pred[i]), t = check(truth[i]);
    ++r.confusion[t][p];
    correct += p == t;
  }
  const double total = static_cast<double>(pred.size());
  r.accuracy = pred.empty() ? 0.0 : static_cast<double>(correct) / total;
  r.per_class.resize(classes);
  for (std::size_t k = 0; k < classes; ++k) {
    auto& c = r.per_class[k];
    for (std::size_t j = 0; j < classes; ++j) {
      c.support += r.confusion[k][j];
      c.predicted += r.confusion[j][k];
    }
    const double tp = static_cast<double>(r.confusion[k][k]);
    c.degenerate = c.support == 0 || c.predicted == 0;
    c.precision = c.predicted ? tp / static_cast<double>(c.predicted) : 0.0;
    c.recall = c.support ? tp / static_cast<double>(c.support) : 0.0;
    c.f1 = c.precision + c.recall > 0.0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
    r.macro_precision += c.precision;
    r.macro_recall += c.recall;
    r.macro_f1 += c.f1;
    if (!pred.empty()) {
      const double w = static_cast<double>(c.support) / total;
      r.weighted_precision += w * c.precision;
      r.weighted_recall += w * c.recall;
      r.weighted_f1 += w * c.f1;
    }
  }
  const double k = static_cast<double>(classes);
  r.macro_precision /= k;
  r.macro_recall /= k;
  r.macro_f1 /= k;
  return r;
}

std::string ClassReport::to_csv(const std::vector<std::string>& names) const {
  std::string out = "class,precision,recall,f1,support,degenerate\n";
  for (std::size_t k = 0; k < classes; ++k) {
    const auto& c = per_class[k];
    out += name_of(names, k) + "," + fmt(c.precision) + "," + fmt(c.recall) + "," + fmt(c.f1) + "," +
           std::to_string(c.support) + "," + (c.degenerate ? "1" : "0") + "\n";
  }
  out += "macro," + fmt(macro_precision) + "," + fmt(macro_recall) + "," + fmt(macro_f1) + ",,\n";
  out += "weighted," + fmt(weighted_precision) + "," + fmt(weighted_recall) + "," + fmt(weighted_f1) + ",,\n";
  return out;
}

std::string ClassReport::confusion_csv(const std::vector<std::string>& names) const {
  std::string out = "truth\\pred";
  for (std::size_t k = 0; k < classes; ++k) out += "," + name_of(names, k);
  out += "\n";
  for (std::size_t t = 0; t < classes; ++t) {
    out += name_of(names, t);
    for (std::size_t p = 0; p < classes; ++p) out += "," + std::to_string(confusion[t][p]);
    out += "\n";
  }
  return out;
}

std::string ClassReport::to_text(const std::vector<std::string>& names) const {
  std::string out = "accuracy: " + fmt(accuracy) + "\n";
  out += "macro_precision: " + fmt(macro_precision) + "\nmacro_recall: " + fmt(macro_recall) +
         "\nmacro_f1: " + fmt(macro_f1) + "\n";
  out += "weighted_precision: " + fmt(weighted_precision) + "\nweighted_recall: " + fmt(weighted_recall) +
         "\nweighted_f1: " + fmt(weighted_f1) + "\n";
  for (std::size_t k = 0; k < classes; ++k) {
    const auto& c = per_class[k];
    const auto n = name_of(names, k);
    out += n + "_precision: " + fmt(c.precision) + "\n" + n + "_recall: " + fmt(c.recall) + "\n" + n +
           "_f1: " + fmt(c.f1) + "\n";
    if (c.degenerate) out += n + "_degenerate: 1\n";
  }
  return out;
}

std::vector<std::size_t> error_histogram(std::span<const double> pred, std::span<const double> truth,
                                         std::size_t bins) {
  check_series(pred, truth, "error_histogram");
  if (bins == 0) throw DataError("error_histogram: zero bins");
  std::vector<std::size_t> counts(bins, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    const double pos = (d + 2.0) / 4.0 * static_cast<double>(bins);
    const auto b = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, static_cast<double>(bins - 1)));
    ++counts[b];
  }
  return counts;
}

std::string histogram_csv(const std::vector<std::size_t>& counts) {
  std::string out = "bin_low,bin_high,count\n";
  const double width = 4.0 / static_cast<double>(counts.size());
  for (std::size_t b = 0; b < counts.size(); ++b)
    out += fmt(-2.0 + width * static_cast<double>(b)) + "," + fmt(-2.0 + width * static_cast<double>(b + 1)) + "," +
           std::to_string(counts[b]) + "\n";
  return out;
}

std::vector<DimensionMetrics> dimensional_report(std::span<const double> pred, std::span<const double> truth) {
  check_series(pred, truth, "dimensional_report");
  if (pred.size() % 2) throw DataError("dimensional_report: expected (N,2) values");
  const std::size_t n = pred.size() / 2;
  std::vector<DimensionMetrics> out;
  const char* names[] = {"valence", "arousal"};
  for (std::size_t d = 0; d < 2; ++d) {
    std::vector<double> p(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = pred[2 * i + d];
      t[i] = truth[2 * i + d];
    }
    DimensionMetrics m;
    m.name = names[d];
    m.rmse = rmse(p, t);
    m.sagr = sagr(p, t);
    try {
      m.cc = cc(p, t);
      m.ccc = ccc(p, t);
    } catch (const DegenerateSeriesError&) {
      m.degenerate = true;
      m.cc = m.ccc = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(m);
  }
  return out;
}

std::string dimensional_csv(const std::vector<DimensionMetrics>& report) {
  std::string out = "dimension,rmse,cc,ccc,sagr\n";
  for (const auto& m : report)
    out += m.name + "," + fmt(m.rmse) + "," + fmt(m.cc) + "," + fmt(m.ccc) + "," + fmt(m.sagr) + "\n";
  return out;
}

std::string dimensional_text(const std::vector<DimensionMetrics>& report) {
  std::string out;
  for (const auto& m : report) {
    out += m.name + "_rmse: " + fmt(m.rmse) + "\n";
    out += m.name + "_cc: " + fmt(m.cc) + "\n";
    out += m.name + "_ccc: " + fmt(m.ccc) + "\n";
    out += m.name + "_sagr: " + fmt(m.sagr) + "\n";
  }
  return out;
}

}  // namespace bnx
