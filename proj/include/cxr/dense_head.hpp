#pragma once
// One-hidden-layer classifier over finding vectors: 14 -> hidden (relu) -> 1
// (sigmoid), trained with unweighted binary cross-entropy.

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "cxr/findings.hpp"
#include "cxr/labels.hpp"
#include "cxr/nn.hpp"

namespace cxr {

inline constexpr std::size_t kDefaultHiddenWidth = 512;

struct DenseHeadConfig {
  TrainConfig train{.epochs = 200};
  std::size_t hidden = kDefaultHiddenWidth;
  bool zero_init_output = false;
};

std::string dense_head_spec_text(std::size_t hidden);

class DenseHead {
 public:
  explicit DenseHead(std::size_t hidden = kDefaultHiddenWidth, const nn::InitOptions& init = {});

  // Hidden width is recovered from the stored parameter shapes.
  static DenseHead load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t hidden() const { return hidden_; }
  // [N,14] -> probabilities [N,1].
  Tensor forward(const Tensor& inputs, bool track_grad) const;
  double predict(const FindingVector& v) const;
  std::vector<double> predict_batch(const std::vector<FindingVector>& v) const;

  nn::Sequential& network() { return net_; }
  const nn::Sequential& network() const { return net_; }
  nn::CaptureHandle capture_activation(std::string_view tag) const {
    return net_.capture_activation(tag);
  }
  static constexpr std::string_view kLogitTag = "output";

 private:
  std::size_t hidden_;
  mutable nn::Sequential net_;
};

struct DenseFitResult {
  std::vector<double> epoch_loss;
};

Tensor finding_batch(const std::vector<FindingVector>& v);

// Throws DataError on empty or mismatched input, NumericError on divergence.
DenseHead fit_dense_head(const std::vector<FindingVector>& inputs, const std::vector<int>& labels,
                         const DenseHeadConfig& config, DenseFitResult* result = nullptr);

}  // namespace cxr
