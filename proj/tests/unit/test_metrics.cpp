#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "cxr/error.hpp"
#include "cxr/metrics.hpp"
#include "cxr/rng.hpp"
#include "oracles.hpp"

using namespace cxr;

namespace {

TEST(Confusion, HandTally) {
  const std::vector<double> s = {0.9, 0.2, 0.6, 0.5, 0.1, 0.7};
  const std::vector<int> y = {1, 1, 0, 1, 0, 0};
  // > 0.5: 0.9 tp, 0.6 fp, 0.7 fp; <= 0.5: 0.2 fn, 0.5 fn, 0.1 tn.
  EXPECT_EQ(confusion(s, y, 0.5), (ConfusionCounts{1, 2, 1, 2}));
}

TEST(Confusion, ExtremeThresholds) {
  const std::vector<double> s = {0.9, 0.8, 0.7};
  const std::vector<int> y = {1, 1, 1};
  EXPECT_EQ(confusion(s, y, 0.1), (ConfusionCounts{3, 0, 0, 0}));
  const std::vector<int> mixed = {1, 0, 1};
  const auto c = confusion(s, mixed, std::numeric_limits<double>::infinity());
  EXPECT_EQ(c.tp + c.fp, 0u);
  EXPECT_EQ(c.total(), 3u);
}

TEST(Confusion, RejectsEmptyOrMismatchedInput) {
  EXPECT_THROW(confusion(std::vector<double>{}, std::vector<int>{}, 0.5), NumericError);
  EXPECT_THROW(confusion(std::vector<double>{0.1}, std::vector<int>{1, 0}, 0.5), ShapeError);
}

TEST(Rates, PerfectClassifierScoresOne) {
  const ConfusionCounts c{4, 0, 6, 0};
  EXPECT_EQ(sensitivity(c), 1.0);
  EXPECT_EQ(specificity(c), 1.0);
  EXPECT_EQ(balanced_accuracy(c), 1.0);
}

TEST(Rates, EmptyClassesAreErrors) {
  try {
    sensitivity(ConfusionCounts{0, 2, 3, 0});
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("positive"), std::string::npos);
  }
  try {
    specificity(ConfusionCounts{2, 0, 0, 3});
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("negative"), std::string::npos);
  }
}

TEST(Rates, TableTwoBalancedAccuracyAnchors) {
  EXPECT_EQ(format_fixed(balanced_accuracy(0.72, 0.78), 2), "0.75");
  EXPECT_EQ(format_fixed(balanced_accuracy(0.79, 0.82), 2), "0.81");
  EXPECT_NEAR(balanced_accuracy(0.79, 0.82), 0.805, 1e-15);
}

TEST(Rates, DuplicationLeavesBalancedAccuracyUnchanged) {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s;
    std::vector<int> y;
    oracle::random_scored_labels(rng, 40, s, y);
    const double base = balanced_accuracy(confusion(s, y, 0.5));
    // Duplicate every positive k times and every negative m times.
    const std::size_t k = 1 + rng.below(4), m = 1 + rng.below(4);
    std::vector<double> s2;
    std::vector<int> y2;
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t r = 0; r < (y[i] ? k : m); ++r) {
        s2.push_back(s[i]);
        y2.push_back(y[i]);
      }
    EXPECT_NEAR(balanced_accuracy(confusion(s2, y2, 0.5)), base, 1e-15);
  }
}

TEST(FormatFixed, RoundsHalfAwayFromZeroAtTheDecimalLevel) {
  EXPECT_EQ(format_fixed(0.805, 2), "0.81");
  EXPECT_EQ(format_fixed(0.8049, 2), "0.80");
  EXPECT_EQ(format_fixed(0.995, 2), "1.00");
  EXPECT_EQ(format_fixed(9.96, 1), "10.0");
  EXPECT_EQ(format_fixed(2.5, 0), "3");
  EXPECT_EQ(format_fixed(-0.125, 2), "-0.13");
  EXPECT_EQ(format_fixed(-0.001, 2), "0.00");
  EXPECT_EQ(format_fixed(0.0, 3), "0.000");
}

TEST(Auc, SpecifiedExamples) {
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(auc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, std::vector<int>{0, 1, 0, 1}), 0.5);
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}), 0.75);
}

TEST(Auc, SingleClassIsAnError) {
  EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), NumericError);
  EXPECT_THROW(roc_curve(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 0}), NumericError);
}

TEST(Auc, RankSumAndTrapezoidMatchPairCounting) {
  Rng rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> s;
    std::vector<int> y;
    oracle::random_scored_labels(rng, 120, s, y);
    const double want = oracle::pair_auc(s, y);
    EXPECT_NEAR(auc(s, y), want, 1e-9) << trial;
    EXPECT_NEAR(roc_curve(s, y).auc, want, 1e-9) << trial;
  }
}

TEST(Auc, ReversedScoresComplement) {
  Rng rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s;
    std::vector<int> y;
    oracle::random_scored_labels(rng, 60, s, y);
    std::vector<double> neg(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) neg[i] = -s[i];
    EXPECT_NEAR(auc(s, y) + auc(neg, y), 1.0, 1e-12);
  }
}

TEST(Auc, InvariantUnderMonotoneTransforms) {
  Rng rng(44);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s;
    std::vector<int> y;
    oracle::random_scored_labels(rng, 60, s, y);
    std::vector<double> t(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(2.0 * s[i]) - 7.0;
    EXPECT_EQ(auc(s, y), auc(t, y));
  }
}

TEST(Roc, CurveIsMonotoneFromOriginToOne) {
  Rng rng(45);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s;
    std::vector<int> y;
    oracle::random_scored_labels(rng, 60, s, y);
    const auto curve = roc_curve(s, y);
    ASSERT_GE(curve.points.size(), 2u);
    EXPECT_EQ(curve.points.front().fpr, 0.0);
    EXPECT_EQ(curve.points.front().tpr, 0.0);
    EXPECT_EQ(curve.points.back().fpr, 1.0);
    EXPECT_EQ(curve.points.back().tpr, 1.0);
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      EXPECT_GE(curve.points[i].fpr, curve.points[i - 1].fpr);
      EXPECT_GE(curve.points[i].tpr, curve.points[i - 1].tpr);
      EXPECT_LT(curve.points[i].threshold, curve.points[i - 1].threshold);
    }
  }
}

TEST(Roc, TiedScoresFormOneStep) {
  const auto curve = roc_curve(std::vector<double>{0.5, 0.5, 0.5, 0.9}, std::vector<int>{0, 1, 0, 1});
  ASSERT_EQ(curve.points.size(), 3u);
  EXPECT_EQ(curve.points[1].tpr, 0.5);
  EXPECT_EQ(curve.points[1].fpr, 0.0);
  EXPECT_EQ(curve.auc, 0.75);
}

TEST(Youden, ThresholdReproducesTheReportedIndex) {
  Rng rng(46);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> s;
    std::vector<int> y;
    oracle::random_scored_labels(rng, 60, s, y);
    const auto op = youden_threshold(s, y);
    const auto c = confusion(s, y, op.threshold);
    EXPECT_NEAR(sensitivity(c) + specificity(c) - 1.0, op.youden, 1e-12);
    // No threshold on the score grid does better.
    for (double t : s) {
      const auto d = confusion(s, y, t);
      EXPECT_LE(sensitivity(d) + specificity(d) - 1.0, op.youden + 1e-12);
    }
  }
}

TEST(Youden, SeparatedScoresSplitBetweenTheClasses) {
  const auto op = youden_threshold(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1});
  EXPECT_EQ(op.youden, 1.0);
  EXPECT_DOUBLE_EQ(op.threshold, 0.5);
}

TEST(Youden, AdjacentDoublesStillSeparate) {
  const double a = 0.5, b = std::nextafter(0.5, 1.0);
  const auto op = youden_threshold(std::vector<double>{a, b}, std::vector<int>{0, 1});
  EXPECT_EQ(op.youden, 1.0);
  EXPECT_EQ(confusion(std::vector<double>{a, b}, std::vector<int>{0, 1}, op.threshold),
            (ConfusionCounts{1, 0, 1, 0}));
}

TEST(Report, TableAndCsvCarryEveryRow) {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y = {0, 0, 1, 1};
  const std::vector<MetricRow> rows = {metric_row("fixed", s, y, 0.5),
                                       metric_row("youden", s, y, youden_threshold(s, y).threshold)};
  EXPECT_EQ(rows[0].auc, 0.75);
  EXPECT_EQ(rows[0].sensitivity, 0.5);
  EXPECT_EQ(rows[0].specificity, 1.0);
  const std::string table = format_metric_table(rows);
  EXPECT_NE(table.find("fixed"), std::string::npos);
  EXPECT_NE(table.find("0.75"), std::string::npos);
  const std::string csv = format_metric_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  const std::string roc = format_roc_csv(roc_curve(s, y));
  EXPECT_EQ(roc.substr(0, roc.find('\n')), "threshold,fpr,tpr");
}

}  // namespace
