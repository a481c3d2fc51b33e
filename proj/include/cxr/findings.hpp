#pragma once
// Stage one: image -> 14 finding probabilities.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cxr/dataset.hpp"
#include "cxr/labels.hpp"
#include "cxr/nn.hpp"
#include "cxr/tensor.hpp"

namespace cxr {

// Probabilities are clamped to [eps, 1 - eps] inside the loss, which caps a
// single cell at -log(eps) ~ 16.1 times its class weight.
inline constexpr double kLossEpsilon = 1e-7;

// Mean over unmasked cells of -[w+ t log p + w- (1-t) log(1-p)].
// probs [N,K]; targets row-major N*K; weights K entries. The gradient is
// taken at the clamped probability. Throws NumericError if every cell is
// masked.
Tensor weighted_bce(const Tensor& probs, std::span<const TargetValue> targets,
                    std::span<const ClassWeight> weights);

// Reference form of one cell, used by weighted_bce.
double bce_cell(double p, double target, const ClassWeight& weight);

struct TrainConfig {
  double learning_rate = 0.01;
  double weight_decay = 1e-5;
  double momentum = 0.0;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  UncertaintyPolicy policy = UncertaintyPolicy::MapToHalf;
  double max_class_weight = kDefaultMaxClassWeight;

  void validate() const;
};

// Default desk-scale network for images of the given extents.
std::string default_findings_spec_text(std::size_t height, std::size_t width);

class FindingsModel {
 public:
  // The layer spec must take a single-channel image and end in dense 14 + sigmoid.
  FindingsModel(nn::ModelSpec spec, const nn::InitOptions& init = {});

  static FindingsModel load(const std::filesystem::path& path);
  // Writes <path> (model text: header + spec) and <path>.params.
  void save(const std::filesystem::path& path) const;

  std::size_t input_height() const;
  std::size_t input_width() const;

  // Image batch [N,1,H,W] -> probabilities [N,14]. Throws ShapeError on a
  // resolution mismatch.
  Tensor forward(const Tensor& images, bool track_grad) const;
  Tensor to_batch(std::span<const Image> images) const;

  FindingVector predict(const Image& image) const;
  std::vector<FindingVector> predict_batch(std::span<const Image> images,
                                           std::size_t chunk = 64) const;

  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  const nn::Sequential& network() const { return net_; }
  // Throws UsageError when frozen.
  nn::Sequential& mutable_network();
  std::vector<NamedTensor>& mutable_parameters() { return mutable_network().parameters(); }

  // Activation capture does not touch parameters and stays available when
  // frozen.
  nn::CaptureHandle capture_activation(std::string_view tag) const;
  // Tag of the dense layer feeding the output sigmoid (pre-sigmoid scores).
  const std::string& logit_tag() const { return logit_tag_; }

 private:
  mutable nn::Sequential net_;
  std::string logit_tag_;
  bool frozen_ = false;
};

// Returns a frozen copy; parameter-mutating calls on it throw UsageError.
FindingsModel freeze(FindingsModel model);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean batch loss
  // Per-finding validation AUC; empty when a finding lacks both classes.
  std::vector<std::optional<double>> validation_auc;
};

struct TrainResult {
  std::vector<EpochLog> trace;
  BalanceWeights balance;
};

std::vector<TargetValue> targets_of(const Study& study, UncertaintyPolicy policy);

// Validation AUC per finding over P (1) vs N (0) marks; U and blank skipped.
std::vector<std::optional<double>> finding_aucs(const std::vector<FindingVector>& predictions,
                                                const std::vector<Study>& studies);

// Minibatch SGD. Balance weights come from `train` only. Throws UsageError
// for a frozen model or an empty set and NumericError (naming the epoch and
// batch) when the loss stops being finite.
TrainResult train_findings(FindingsModel& model, const std::vector<Study>& train,
                           const TrainConfig& config,
                           const std::vector<Study>* validation = nullptr,
                           const std::function<void(const EpochLog&)>& on_epoch = {});

std::string format_loss_trace(const std::vector<EpochLog>& trace, const FindingCatalog& catalog);

}  // namespace cxr
