#include "cxr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "cxr/error.hpp"

namespace cxr {
namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.empty()) throw NumericError("metrics need at least one sample");
  if (scores.size() != labels.size())
    throw ShapeError("metrics: " + std::to_string(scores.size()) + " scores but " +
                     std::to_string(labels.size()) + " labels");
  for (int y : labels)
    if (y != 0 && y != 1) throw DataError("metrics: labels must be 0 or 1");
  for (double s : scores)
    if (std::isnan(s)) throw NumericError("metrics: NaN score");
}

std::pair<std::size_t, std::size_t> class_sizes(std::span<const int> labels) {
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  return {pos, labels.size() - pos};
}

void require_both(std::size_t pos, std::size_t neg) {
  if (pos == 0) throw NumericError("no positive samples: AUC is undefined");
  if (neg == 0) throw NumericError("no negative samples: AUC is undefined");
}

std::string fixed(double v, int digits) { return format_fixed(v, digits); }

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string format_fixed(double v, int digits) {
  if (!std::isfinite(v) || digits < 0 || digits > 12) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", std::clamp(digits, 0, 12), v);
    return buf;
  }
  // Six guard digits absorb binary representation error, so 0.805 stored as
  // 0.80499999999999994 still reads as 0.805 before rounding.
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits + 6, std::abs(v));
  std::string s = buf;
  const std::size_t keep = s.size() - 6;
  const bool up = s[keep] >= '5';
  s.resize(keep);
  if (up) {
    std::size_t i = s.size();
    while (i-- > 0) {
      if (s[i] == '.') continue;
      if (s[i] != '9') {
        ++s[i];
        break;
      }
      s[i] = '0';
      if (i == 0) s.insert(s.begin(), '1');
    }
  }
  if (!s.empty() && s.back() == '.') s.pop_back();
  const bool zero = s.find_first_not_of("0.") == std::string::npos;
  return (v < 0 && !zero ? "-" : "") + s;
}

ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold) {
  check_inputs(scores, labels);
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] > threshold;
    if (labels[i] == 1)
      ++(predicted ? c.tp : c.fn);
    else
      ++(predicted ? c.fp : c.tn);
  }
  return c;
}

double sensitivity(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) throw NumericError("sensitivity undefined: no positive samples");
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double specificity(const ConfusionCounts& c) {
  if (c.tn + c.fp == 0) throw NumericError("specificity undefined: no negative samples");
  return static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
}

double balanced_accuracy(const ConfusionCounts& c) {
  return balanced_accuracy(sensitivity(c), specificity(c));
}

double balanced_accuracy(double sens, double spec) { return (sens + spec) / 2.0; }

double auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto [pos, neg] = class_sizes(labels);
  require_both(pos, neg);
  // Rank-sum form of the pair count: sort once, give tied groups their
  // average rank.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the positive rank sum, kept integral so ties stay exact.
  unsigned long long twice_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) group_pos += labels[order[j++]];
    // ranks i+1..j average (i+1+j)/2
    twice_rank_sum += static_cast<unsigned long long>(group_pos) * (i + 1 + j);
    i = j;
  }
  const double u = static_cast<double>(twice_rank_sum) / 2.0 -
                   static_cast<double>(pos) * static_cast<double>(pos + 1) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto [pos, neg] = class_sizes(labels);
  require_both(pos, neg);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] == 1)
        ++tp;
      else
        ++fp;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  curve.auc = trapezoid_area(curve.points);
  return curve;
}

double trapezoid_area(const std::vector<RocPoint>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  return area;
}

OperatingPoint youden_threshold(std::span<const double> scores, std::span<const int> labels) {
  const RocCurve curve = roc_curve(scores, labels);
  // Point k >= 1 predicts positive for the k highest distinct scores; under
  // the "score > t" rule that is any t between distinct[k] and distinct[k-1].
  std::vector<double> distinct(scores.begin(), scores.end());
  std::sort(distinct.begin(), distinct.end(), std::greater<>());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  OperatingPoint best{std::numeric_limits<double>::infinity(), -1.0};
  for (std::size_t k = 0; k < curve.points.size(); ++k) {
    const double j = curve.points[k].tpr - curve.points[k].fpr;
    if (j <= best.youden) continue;
    double t = std::numeric_limits<double>::infinity();  // k = 0: nothing positive
    if (k == distinct.size())
      t = -std::numeric_limits<double>::infinity();
    else if (k > 0) {
      // Adjacent doubles can round the midpoint up onto the higher score.
      t = distinct[k] + (distinct[k - 1] - distinct[k]) / 2.0;
      if (!(t < distinct[k - 1])) t = distinct[k];
    }
    best = {t, j};
  }
  return best;
}

MetricRow metric_row(std::string name, std::span<const double> scores,
                     std::span<const int> labels, double threshold) {
  MetricRow row;
  row.name = std::move(name);
  row.threshold = threshold;
  row.counts = confusion(scores, labels, threshold);
  row.sensitivity = sensitivity(row.counts);
  row.specificity = specificity(row.counts);
  row.balanced_accuracy = balanced_accuracy(row.sensitivity, row.specificity);
  row.auc = auc(scores, labels);
  return row;
}

std::string format_metric_table(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %10s %6s %6s %6s %6s %6s %6s %6s %6s\n", "operating",
                "threshold", "TP", "FP", "TN", "FN", "Sens", "Spec", "BA", "AUC");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-12s %10.4f %6zu %6zu %6zu %6zu %6s %6s %6s %6s\n",
                  r.name.c_str(), r.threshold, r.counts.tp, r.counts.fp, r.counts.tn, r.counts.fn,
                  fixed(r.sensitivity, 2).c_str(), fixed(r.specificity, 2).c_str(),
                  fixed(r.balanced_accuracy, 2).c_str(), fixed(r.auc, 2).c_str());
    out << line;
  }
  return out.str();
}

std::string format_metric_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "operating_point,threshold,tp,fp,tn,fn,sensitivity,specificity,balanced_accuracy,auc\n";
  for (const auto& r : rows)
    out << r.name << ',' << exact(r.threshold) << ',' << r.counts.tp << ',' << r.counts.fp << ','
        << r.counts.tn << ',' << r.counts.fn << ',' << exact(r.sensitivity) << ','
        << exact(r.specificity) << ',' << exact(r.balanced_accuracy) << ',' << exact(r.auc)
        << '\n';
  return out.str();
}

std::string format_roc_csv(const RocCurve& curve) {
  std::ostringstream out;
  out << "threshold,fpr,tpr\n";
  for (const auto& p : curve.points)
    out << exact(p.threshold) << ',' << exact(p.fpr) << ',' << exact(p.tpr) << '\n';
  return out.str();
}

}  // namespace cxr
