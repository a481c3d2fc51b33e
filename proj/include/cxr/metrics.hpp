#pragma once
// Binary classification metrics: confusion counts, sensitivity, specificity,
// balanced accuracy, ROC curves and AUC.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cxr {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

// score > threshold is a positive prediction.
ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold);

// Throw NumericError when the relevant class is empty.
double sensitivity(const ConfusionCounts& c);
double specificity(const ConfusionCounts& c);
double balanced_accuracy(const ConfusionCounts& c);
double balanced_accuracy(double sensitivity, double specificity);

// Probability that a random positive outscores a random negative, ties 0.5.
// Throws NumericError unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // scores >= threshold are positive at this point
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) first, (1,1) last
  double auc = 0.0;              // trapezoidal area
};

// Thresholds sweep the distinct scores high to low; equal scores form one step.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);
double trapezoid_area(const std::vector<RocPoint>& points);

struct OperatingPoint {
  double threshold = 0.0;
  double youden = 0.0;  // sensitivity + specificity - 1
};

// Threshold (for the "score > threshold" rule) maximizing Youden's J. Ties
// resolve to the largest such threshold.
OperatingPoint youden_threshold(std::span<const double> scores, std::span<const int> labels);

struct MetricRow {
  std::string name;  // operating point label
  double threshold = 0.0;
  ConfusionCounts counts;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double balanced_accuracy = 0.0;
  double auc = 0.0;
};

MetricRow metric_row(std::string name, std::span<const double> scores,
                     std::span<const int> labels, double threshold);

// Decimal rounding half away from zero, after discarding binary
// representation error below the sixth guard digit: 0.805 -> "0.81".
std::string format_fixed(double v, int digits);

std::string format_metric_table(const std::vector<MetricRow>& rows);
std::string format_metric_csv(const std::vector<MetricRow>& rows);
std::string format_roc_csv(const RocCurve& curve);

}  // namespace cxr
