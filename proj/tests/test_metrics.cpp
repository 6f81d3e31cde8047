#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "bregnext/error.hpp"
#include "bregnext/metrics.hpp"
#include "support.hpp"

namespace bnx {
namespace {

using V = std::vector<double>;

TEST(SeriesMetrics, MatchBruteForceOracles) {
  Rng rng(71);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto [x, y] = test::random_series(rng);
    const test::SeriesOracle o(x, y);
    ASSERT_NEAR(rmse(x, y), test::oracle_rmse(x, y), 1e-9);
    ASSERT_NEAR(cc(x, y), o.cc(), 1e-9);
    ASSERT_NEAR(ccc(x, y), o.ccc(), 1e-9);
    ASSERT_EQ(sagr(x, y), test::oracle_sagr(x, y));
  }
}

TEST(SeriesMetrics, WorkedExamples) {
  EXPECT_NEAR(ccc(V{0, 1, 2}, V{-1, 0, 1}), 4.0 / 7.0, 1e-9);
  EXPECT_DOUBLE_EQ(rmse(V{0, 1}, V{1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(rmse(V{1.5, 2.5, -0.5}, V{1, 2, -1}), 0.5);
  EXPECT_NEAR(cc(V{1, 2, 3, 4}, V{1, 2, 3, 5}), test::SeriesOracle(V{1, 2, 3, 4}, V{1, 2, 3, 5}).cc(), 1e-12);
  EXPECT_NEAR(cc(V{-1, 0.5, 2}, V{-2.1, 0.9, 3.9}), 1.0, 1e-12);
  EXPECT_NEAR(cc(V{-1, 0.5, 2}, V{1, -0.5, -2}), -1.0, 1e-12);
  EXPECT_DOUBLE_EQ(sagr(V{0.5, -0.2}, V{0.1, -0.9}), 1.0);
  EXPECT_DOUBLE_EQ(sagr(V{0.5, -0.2}, V{-0.1, -0.9}), 0.5);
  EXPECT_DOUBLE_EQ(sagr(V{0.0, 0.3}, V{0.2, 0.3}), 0.5);
  EXPECT_DOUBLE_EQ(ccc(V{3, 1, 2}, V{3, 1, 2}), 1.0);
}

TEST(SeriesMetrics, Properties) {
  Rng rng(72);
  for (int trial = 0; trial < 300; ++trial) {
    const auto [x, y] = test::random_series(rng);
    const double c = cc(x, y), k = ccc(x, y);
    EXPECT_GE(c, -1.0 - 1e-12);
    EXPECT_LE(c, 1.0 + 1e-12);
    EXPECT_LE(std::abs(k), std::abs(c) + 1e-12);
    const double s = sagr(x, y);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_GE(rmse(x, y), 0.0);
    EXPECT_EQ(rmse(x, x), 0.0);
    V z = y;
    const double a = rng.uniform(0.1, 5), b = rng.normal(0, 3);
    for (auto& v : z) v = a * v + b;
    EXPECT_NEAR(cc(x, z), c, 1e-9);
  }
  // shifting one series leaves cc alone but lowers ccc
  const V gt{-1, 0, 1}, shifted{0, 1, 2};
  EXPECT_LT(ccc(shifted, gt), cc(shifted, gt));
}

TEST(SeriesMetrics, Errors) {
  EXPECT_THROW(rmse(V{}, V{}), DataError);
  EXPECT_THROW(rmse(V{1}, V{1, 2}), DataError);
  EXPECT_THROW(sagr(V{}, V{}), DataError);
  EXPECT_THROW(cc(V{1, 1, 1}, V{1, 2, 3}), DegenerateSeriesError);
  EXPECT_THROW(ccc(V{1, 2, 3}, V{2, 2, 2}), DegenerateSeriesError);
}

TEST(ClassReport, PerfectPrediction) {
  const std::vector<int> y{0, 1, 2, 2, 1, 0, 3};
  const auto r = class_report(y, y, 4);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  for (const auto& c : r.per_class) {
    EXPECT_DOUBLE_EQ(c.precision, 1.0);
    EXPECT_DOUBLE_EQ(c.recall, 1.0);
    EXPECT_DOUBLE_EQ(c.f1, 1.0);
  }
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(r.confusion[i][j] > 0, i == j);
}

TEST(ClassReport, AllOneClass) {
  const std::vector<int> truth{0, 1, 2, 3, 0, 1, 2, 3}, pred(8, 2);
  const auto r = class_report(pred, truth, 4);
  EXPECT_DOUBLE_EQ(r.per_class[2].recall, 1.0);
  EXPECT_DOUBLE_EQ(r.per_class[2].precision, 0.25);
  EXPECT_DOUBLE_EQ(r.per_class[2].f1, 0.4);
  EXPECT_TRUE(r.per_class[0].degenerate);
  EXPECT_DOUBLE_EQ(r.per_class[0].precision, 0.0);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.25);
  EXPECT_DOUBLE_EQ(r.macro_recall, 0.25);
}

TEST(ClassReport, AbsentClassIsDegenerate) {
  const auto r = class_report(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 1}, 3);
  EXPECT_TRUE(r.per_class[2].degenerate);
  EXPECT_EQ(r.per_class[2].support, 0u);
  EXPECT_DOUBLE_EQ(r.per_class[2].recall, 0.0);
  EXPECT_THROW(class_report(std::vector<int>{0, 3}, std::vector<int>{0, 1}, 3), DataError);
  EXPECT_THROW(class_report(std::vector<int>{0}, std::vector<int>{0, 1}, 3), DataError);
}

TEST(ClassReport, RandomPropertiesAgainstCounting) {
  Rng rng(73);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(7), n = 1 + rng.below(100);
    std::vector<int> p(n), t(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<int>(rng.below(k)), t[i] = static_cast<int>(rng.below(k));
    const auto r = class_report(p, t, k);
    std::size_t total = 0, hits = 0;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) total += r.confusion[i][j], hits += i == j ? r.confusion[i][j] : 0;
    EXPECT_EQ(total, n);
    EXPECT_DOUBLE_EQ(r.accuracy, static_cast<double>(hits) / n);
    double best = 0;
    for (std::size_t c = 0; c < k; ++c) {
      best = std::max(best, r.per_class[c].f1);
      std::size_t tp = 0, pc = 0, tc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        tp += p[i] == static_cast<int>(c) && t[i] == static_cast<int>(c);
        pc += p[i] == static_cast<int>(c);
        tc += t[i] == static_cast<int>(c);
      }
      if (pc) EXPECT_DOUBLE_EQ(r.per_class[c].precision, static_cast<double>(tp) / pc);
      if (tc) EXPECT_DOUBLE_EQ(r.per_class[c].recall, static_cast<double>(tp) / tc);
    }
    EXPECT_LE(r.macro_f1, best + 1e-12);
  }
}

TEST(ClassReport, CsvAndText) {
  const auto r = class_report(std::vector<int>{0, 1, 1}, std::vector<int>{0, 1, 0}, 2);
  const auto csv = r.to_csv({"cat", "dog"});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "class,precision,recall,f1,support,degenerate");
  EXPECT_NE(csv.find("dog,"), std::string::npos);
  EXPECT_NE(r.confusion_csv().find('\n'), std::string::npos);
  EXPECT_NE(r.to_text().find("accuracy:"), std::string::npos);
}

TEST(ErrorHistogram, Binning) {
  const V x{0.1, -0.3, 1.9, 5.0, -5.0};
  const auto same = error_histogram(x, x, 40);
  EXPECT_EQ(same[20], 5u);
  EXPECT_EQ(std::accumulate(same.begin(), same.end(), std::size_t{0}), 5u);
  const auto h = error_histogram(V{0, 0, 0, 0}, V{0.05, 3.0, -3.0, -1.0}, 4);
  // differences -0.05, -3 (clipped), 3 (clipped), 1
  EXPECT_EQ(h, (std::vector<std::size_t>{1, 1, 0, 2}));
  EXPECT_EQ(histogram_csv({1, 2}).substr(0, 3), "bin");
}

TEST(Dimensional, ReportColumns) {
  const V pred{0.1, 0.2, -0.3, 0.4, 0.5, -0.1};
  const V truth{0.0, 0.3, -0.2, 0.2, 0.6, 0.0};
  const auto r = dimensional_report(pred, truth);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].name, "valence");
  const V pv{0.1, -0.3, 0.5}, tv{0.0, -0.2, 0.6};
  EXPECT_DOUBLE_EQ(r[0].rmse, rmse(pv, tv));
  EXPECT_DOUBLE_EQ(r[0].ccc, ccc(pv, tv));
  const auto deg = dimensional_report(V{1, 0, 1, 0}, V{0, 1, 0.5, 1});
  EXPECT_TRUE(deg[1].degenerate);
  EXPECT_TRUE(std::isnan(deg[1].cc));
  const auto text = dimensional_text(r);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 8);
  EXPECT_THROW(dimensional_report(V{1, 2, 3}, V{1, 2, 3}), DataError);
}

}  // namespace
}  // namespace bnx
