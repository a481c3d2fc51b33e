#pragma once
// Layer stacks described by a small text grammar, with named parameters and
// activation capture for attribution methods.
//
// Model spec grammar, one layer per line, '#' starts a comment:
//
//   input <extent>...             e.g. "input 1 32 32" (C H W) or "input 14"
//   conv <filters> <kernel> [stride=<s>] [pad=<p>] [name=<tag>]
//   maxpool <kernel> [stride=<s>] [name=<tag>]     stride defaults to kernel
//   relu | sigmoid | gap | flatten [name=<tag>]
//   dense <units> [name=<tag>]
//
// Unnamed layers are tagged <kind><ordinal>, counting per kind from 1
// (conv1, relu1, conv2, relu2, pool1, gap1, dense1, sigmoid1). Parameters are
// named "<tag>.weight" and "<tag>.bias".

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cxr/param_io.hpp"
#include "cxr/tensor.hpp"

namespace cxr::nn {

enum class LayerKind { Conv, MaxPool, Relu, Sigmoid, GlobalAvgPool, Flatten, Dense };

std::string_view kind_name(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::size_t units = 0;  // conv filters or dense outputs
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::string tag;

  bool operator==(const LayerSpec&) const = default;
};

struct ModelSpec {
  Shape input;  // per-sample extents, no batch axis
  std::vector<LayerSpec> layers;

  // Throws DataError with a line number on malformed text.
  static ModelSpec parse(std::string_view text);
  std::string to_text() const;

  bool operator==(const ModelSpec&) const = default;
};

struct InitOptions {
  std::uint64_t seed = 1;
  // Zero the weights and bias of the final dense layer.
  bool zero_final_dense = false;
};

struct CaptureSlot {
  Tensor activation;
};

// Handle to the activation recorded under one tag by the most recent forward
// pass. The gradient is available after backward on a loss built from it.
class CaptureHandle {
 public:
  CaptureHandle() = default;
  explicit CaptureHandle(std::shared_ptr<CaptureSlot> slot) : slot_(std::move(slot)) {}

  bool captured() const { return slot_ && slot_->activation.defined(); }
  const Tensor& activation() const;
  std::span<const double> gradient() const;

 private:
  std::shared_ptr<CaptureSlot> slot_;
};

class Sequential {
 public:
  Sequential(ModelSpec spec, const InitOptions& init);

  const ModelSpec& spec() const { return spec_; }
  // Output extents of each layer for one sample, parallel to spec().layers.
  const std::vector<Shape>& layer_shapes() const { return shapes_; }
  Shape output_shape() const { return shapes_.back(); }

  std::vector<NamedTensor>& parameters() { return params_; }
  const std::vector<NamedTensor>& parameters() const { return params_; }
  // Replaces parameter values; names and shapes must match exactly.
  void load(const std::vector<NamedTensor>& params);

  // Batch forward. With track_grad the parameters participate in the graph;
  // otherwise detached copies are used and only the input can carry history.
  Tensor forward(const Tensor& batch, bool track_grad) const;

  CaptureHandle capture_activation(std::string_view tag);
  bool has_tag(std::string_view tag) const;
  std::vector<std::string> tags() const;
  // Tag of the last spatial feature map produced by a convolution block
  // (the conv itself, or the relu directly following it). Empty if none.
  std::string last_conv_tag() const;

 private:
  ModelSpec spec_;
  std::vector<Shape> shapes_;
  std::vector<NamedTensor> params_;
  std::map<std::string, std::size_t> param_index_;
  std::map<std::string, std::vector<std::weak_ptr<CaptureSlot>>, std::less<>> captures_;
};

// Plain SGD with L2 weight decay folded into the gradient:
//   v = grad + weight_decay * theta
//   buf = momentum * buf + v        (only when momentum > 0)
//   theta -= learning_rate * (momentum > 0 ? buf : v)
class Sgd {
 public:
  Sgd(double learning_rate, double weight_decay, double momentum = 0.0);

  // Applies one update to every parameter that holds a gradient, then
  // clears the gradients.
  void step(std::vector<NamedTensor>& params);

 private:
  double lr_;
  double wd_;
  double momentum_;
  std::map<std::string, std::vector<double>> velocity_;
};

}  // namespace cxr::nn
