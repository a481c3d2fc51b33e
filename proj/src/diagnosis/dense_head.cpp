#include "cxr/dense_head.hpp"

#include <cmath>
#include <numeric>

#include "cxr/error.hpp"
#include "cxr/param_io.hpp"
#include "cxr/rng.hpp"

namespace cxr {

std::string dense_head_spec_text(std::size_t hidden) {
  return "input " + std::to_string(kFindingCount) + "\ndense " + std::to_string(hidden) +
         " name=hidden\nrelu\ndense 1 name=output\nsigmoid\n";
}

namespace {

std::size_t checked_width(std::size_t hidden) {
  if (hidden == 0) throw UsageError("dense head hidden width must be positive");
  return hidden;
}

}  // namespace

DenseHead::DenseHead(std::size_t hidden, const nn::InitOptions& init)
    : hidden_(checked_width(hidden)),
      net_(nn::ModelSpec::parse(dense_head_spec_text(hidden)), init) {}

DenseHead DenseHead::load(const std::filesystem::path& path) {
  const auto params = load_parameters(path);
  for (const auto& p : params) {
    if (p.name != "hidden.bias") continue;
    if (p.tensor.rank() != 1) break;
    DenseHead head(p.tensor.dim(0));
    head.net_.load(params);
    return head;
  }
  throw DataError(path.string() + ": not a dense head parameter file (no hidden.bias)");
}

void DenseHead::save(const std::filesystem::path& path) const {
  save_parameters(path, net_.parameters());
}

Tensor finding_batch(const std::vector<FindingVector>& v) {
  std::vector<double> data;
  data.reserve(v.size() * kFindingCount);
  for (const auto& row : v) data.insert(data.end(), row.begin(), row.end());
  return Tensor::from_data({v.size(), kFindingCount}, std::move(data));
}

Tensor DenseHead::forward(const Tensor& inputs, bool track_grad) const {
  return net_.forward(inputs, track_grad);
}

double DenseHead::predict(const FindingVector& v) const { return predict_batch({v}).front(); }

std::vector<double> DenseHead::predict_batch(const std::vector<FindingVector>& v) const {
  if (v.empty()) return {};
  const Tensor out = net_.forward(finding_batch(v), false);
  return {out.data().begin(), out.data().end()};
}

DenseHead fit_dense_head(const std::vector<FindingVector>& inputs, const std::vector<int>& labels,
                         const DenseHeadConfig& config, DenseFitResult* result) {
  if (inputs.empty()) throw DataError("dense head needs at least one training sample");
  if (inputs.size() != labels.size())
    throw DataError("dense head: " + std::to_string(inputs.size()) + " inputs but " +
                    std::to_string(labels.size()) + " labels");
  for (int y : labels)
    if (y != 0 && y != 1) throw DataError("dense head labels must be 0 or 1");
  if (config.hidden == 0) throw UsageError("hidden width must be positive");
  config.train.validate();

  DenseHead head(config.hidden, {config.train.seed, config.zero_init_output});
  nn::Sgd sgd(config.train.learning_rate, config.train.weight_decay, config.train.momentum);
  Rng rng(config.train.seed);
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  const ClassWeight unit;
  if (result) result->epoch_loss.clear();

  for (std::size_t epoch = 1; epoch <= config.train.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0, b = 0; start < order.size();
         start += config.train.batch_size, ++b) {
      const std::size_t end = std::min(order.size(), start + config.train.batch_size);
      std::vector<FindingVector> x;
      std::vector<TargetValue> t;
      for (std::size_t i = start; i < end; ++i) {
        x.push_back(inputs[order[i]]);
        t.push_back({static_cast<double>(labels[order[i]]), false});
      }
      try {
        const Tensor probs = head.network().forward(finding_batch(x), true);
        const Tensor loss = weighted_bce(probs, t, std::span<const ClassWeight>(&unit, 1));
        const double value = loss.item();
        if (!std::isfinite(value))
          throw NumericError("dense head training diverged: loss is " + std::to_string(value));
        loss.backward();
        sgd.step(head.network().parameters());
        loss_sum += value;
        ++batches;
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                           ", batch index " + std::to_string(b) + ")");
      }
    }
    if (result) result->epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  return head;
}

}  // namespace cxr
