#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "cxr/error.hpp"
#include "cxr/findings.hpp"
#include "cxr/metrics.hpp"
#include "cxr/rng.hpp"

namespace cxr {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw UsageError("learning_rate must be a finite non-negative number");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
    throw UsageError("weight_decay must be a finite non-negative number");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw UsageError("momentum must lie in [0,1)");
  if (batch_size == 0) throw UsageError("batch_size must be positive");
  if (!(max_class_weight >= 1.0)) throw UsageError("max_class_weight must be at least 1");
}

std::vector<TargetValue> targets_of(const Study& study, UncertaintyPolicy policy) {
  std::vector<TargetValue> out;
  out.reserve(kFindingCount);
  for (LabelMark m : study.marks) out.push_back(mark_to_target(m, policy));
  return out;
}

std::vector<std::optional<double>> finding_aucs(const std::vector<FindingVector>& predictions,
                                                const std::vector<Study>& studies) {
  if (predictions.size() != studies.size())
    throw ShapeError("finding_aucs: predictions and studies differ in length");
  std::vector<std::optional<double>> out(kFindingCount);
  for (std::size_t f = 0; f < kFindingCount; ++f) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < studies.size(); ++i) {
      const LabelMark m = studies[i].marks[f];
      if (m != LabelMark::Positive && m != LabelMark::Negative) continue;
      scores.push_back(predictions[i][f]);
      labels.push_back(m == LabelMark::Positive ? 1 : 0);
    }
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) continue;
    out[f] = auc(scores, labels);
  }
  return out;
}

TrainResult train_findings(FindingsModel& model, const std::vector<Study>& train,
                           const TrainConfig& config, const std::vector<Study>* validation,
                           const std::function<void(const EpochLog&)>& on_epoch) {
  if (model.frozen()) throw UsageError("cannot train a frozen findings model");
  if (train.empty()) throw UsageError("training set is empty");
  config.validate();

  TrainResult result;
  const auto counts = count_marks(train);
  const auto& names = FindingCatalog::default_catalog().names();
  result.balance =
      compute_balance_weights(counts, config.policy, config.max_class_weight, &names);

  std::vector<std::vector<TargetValue>> targets;
  targets.reserve(train.size());
  for (const Study& s : train) targets.push_back(targets_of(s, config.policy));

  nn::Sequential& net = model.mutable_network();
  nn::Sgd sgd(config.learning_rate, config.weight_decay, config.momentum);
  Rng rng(config.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<Image> batch_images;
  std::vector<TargetValue> batch_targets;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += config.batch_size, ++b) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch_images.clear();
      batch_targets.clear();
      bool any_active = false;
      for (std::size_t i = start; i < end; ++i) {
        batch_images.push_back(train[order[i]].image);
        for (const TargetValue& t : targets[order[i]]) {
          batch_targets.push_back(t);
          any_active = any_active || !t.masked;
        }
      }
      if (!any_active) continue;  // nothing to learn from an all-blank batch
      const auto where = [&] {
        return "epoch " + std::to_string(epoch) + ", batch index " + std::to_string(b);
      };
      try {
        const Tensor probs = net.forward(model.to_batch(batch_images), true);
        const Tensor loss = weighted_bce(probs, batch_targets, result.balance.weights);
        const double value = loss.item();
        if (!std::isfinite(value))
          throw NumericError("training diverged: loss is " + std::to_string(value));
        loss.backward();
        sgd.step(net.parameters());
        loss_sum += value;
        ++batches;
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (" + where() + ")");
      }
    }
    EpochLog log;
    log.epoch = epoch;
    log.loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    if (validation && !validation->empty()) {
      std::vector<Image> images;
      images.reserve(validation->size());
      for (const Study& s : *validation) images.push_back(s.image);
      log.validation_auc = finding_aucs(model.predict_batch(images), *validation);
    }
    if (on_epoch) on_epoch(log);
    result.trace.push_back(std::move(log));
  }
  return result;
}

std::string format_loss_trace(const std::vector<EpochLog>& trace, const FindingCatalog& catalog) {
  std::ostringstream out;
  out << "epoch\tloss";
  for (const auto& name : catalog.names()) out << "\tauc:" << name;
  out << '\n';
  char buf[64];
  for (const auto& e : trace) {
    std::snprintf(buf, sizeof buf, "%.10f", e.loss);
    out << e.epoch << '\t' << buf;
    for (std::size_t f = 0; f < catalog.size(); ++f) {
      out << '\t';
      if (f < e.validation_auc.size() && e.validation_auc[f]) {
        std::snprintf(buf, sizeof buf, "%.4f", *e.validation_auc[f]);
        out << buf;
      } else {
        out << '-';
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace cxr
