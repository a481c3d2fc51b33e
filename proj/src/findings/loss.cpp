#include <algorithm>
#include <cmath>

#include "cxr/error.hpp"
#include "cxr/findings.hpp"

namespace cxr {
namespace {

double clamp_probability(double p) { return std::clamp(p, kLossEpsilon, 1.0 - kLossEpsilon); }

}  // namespace

double bce_cell(double p, double target, const ClassWeight& weight) {
  const double q = clamp_probability(p);
  return -(weight.positive * target * std::log(q) +
           weight.negative * (1.0 - target) * std::log(1.0 - q));
}

Tensor weighted_bce(const Tensor& probs, std::span<const TargetValue> targets,
                    std::span<const ClassWeight> weights) {
  if (probs.rank() != 2)
    throw ShapeError("weighted_bce expects probabilities [N,K], got " + to_string(probs.shape()));
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  if (targets.size() != n * k)
    throw ShapeError("weighted_bce: " + std::to_string(targets.size()) + " targets for " +
                     to_string(probs.shape()) + " probabilities");
  if (weights.size() != k)
    throw ShapeError("weighted_bce: " + std::to_string(weights.size()) + " class weights for " +
                     std::to_string(k) + " outputs");

  const auto p = probs.data();
  double total = 0.0;
  std::size_t active = 0;
  for (std::size_t i = 0; i < n * k; ++i) {
    if (targets[i].masked) continue;
    total += bce_cell(p[i], targets[i].target, weights[i % k]);
    ++active;
  }
  if (active == 0) throw NumericError("weighted_bce: every cell is masked, the mean is undefined");
  const double count = static_cast<double>(active);

  std::vector<TargetValue> t(targets.begin(), targets.end());
  std::vector<ClassWeight> w(weights.begin(), weights.end());
  return Tensor::make_result(
      {}, {total / count}, {probs},
      [p = probs, t = std::move(t), w = std::move(w), k, count](std::span<const double> g,
                                                                  GradSink& sink) {
        auto dp = sink.grad(0);
        const auto pv = p.data();
        for (std::size_t i = 0; i < t.size(); ++i) {
          if (t[i].masked) continue;
          const double q = clamp_probability(pv[i]);
          const ClassWeight& cw = w[i % k];
          const double d = -cw.positive * t[i].target / q + cw.negative * (1.0 - t[i].target) / (1.0 - q);
          dp[i] += g[0] * d / count;
        }
      });
}

}  // namespace cxr
