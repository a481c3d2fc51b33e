#pragma once
// Dense float64 tensors with reverse-mode differentiation.
//
// A Tensor is a shared handle to a graph node. Results of ops keep their
// inputs alive only when some input requires a gradient, so inference
// builds no graph. Tensors are immutable after construction except for
// gradient population and optimizer updates on leaves.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cxr {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {
struct Node;
}

class GradSink;

class Tensor {
 public:
  // Receives the gradient of the op output and scatters into input grads.
  using BackwardFn = std::function<void(std::span<const double> grad_out, GradSink& sink)>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  // Builds an op result. `backward` is dropped (and inputs released) when no
  // input requires a gradient.
  static Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                            BackwardFn backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  std::span<const double> data() const;
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  // Throws UsageError when no gradient is held.
  std::span<const double> grad() const;
  void zero_grad();

  // Leaves only; used by optimizers and loaders.
  std::span<double> mutable_data();

  // Reverse pass from a scalar. Refuses to run while any reachable leaf that
  // requires a gradient still holds one from an earlier pass.
  void backward() const;

  // Same values, no history, no gradient.
  Tensor detach() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
  friend class GradSink;
};

// Per-op view of input gradients during backward. Buffers are allocated on
// first use and accumulate across uses of the same input.
class GradSink {
 public:
  bool wants(std::size_t input) const;
  std::span<double> grad(std::size_t input);

 private:
  explicit GradSink(detail::Node& node) : node_(node) {}
  detail::Node& node_;
  friend class Tensor;
};

namespace ops {

// Cross-correlation. input [N,C,H,W], kernel [F,C,kh,kw], bias [F] or undefined.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride = 1,
              std::size_t padding = 0);
// input [N,D], weight [D,K], bias [K] or undefined.
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor max_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride);
// [N,C,H,W] -> [N,C]
Tensor global_avg_pool(const Tensor& x);
// Elementwise; either operand may be a single element (broadcast).
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Strictly positive input required.
Tensor log(const Tensor& x);
// Same data, new extents with equal element count.
Tensor reshape(const Tensor& x, Shape shape);

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding);
std::size_t pool_output_extent(std::size_t in, std::size_t kernel, std::size_t stride);

}  // namespace ops
}  // namespace cxr
