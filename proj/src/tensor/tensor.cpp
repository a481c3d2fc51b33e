#include "cxr/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "cxr/error.hpp"

namespace cxr {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  bool leaf = true;
  bool has_grad = false;
  std::vector<double> grad;
  std::vector<std::shared_ptr<Node>> inputs;
  Tensor::BackwardFn backward;
};

}  // namespace detail

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = element_count(shape);
  return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  for (std::size_t extent : shape)
    if (extent == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape));
  if (element_count(shape) != data.size())
    throw ShapeError("shape " + to_string(shape) + " holds " +
                     std::to_string(element_count(shape)) + " values, got " +
                     std::to_string(data.size()));
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

Tensor Tensor::make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                           BackwardFn backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->leaf = false;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.defined() && t.requires_grad(); });
  if (any) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }

std::span<const double> Tensor::data() const { return node_->data; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->leaf; }
bool Tensor::has_grad() const { return node_->has_grad; }

std::span<const double> Tensor::grad() const {
  if (!node_->has_grad) throw UsageError("tensor holds no gradient");
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->has_grad = false;
  node_->grad.clear();
}

std::span<double> Tensor::mutable_data() {
  if (!node_->leaf) throw UsageError("only leaf tensors may be mutated in place");
  return node_->data;
}

Tensor Tensor::detach() const { return from_data(shape(), node_->data, false); }

void Tensor::backward() const {
  if (!defined()) throw UsageError("backward on an undefined tensor");
  if (numel() != 1)
    throw UsageError("backward needs a scalar loss, got shape " + to_string(shape()));
  if (!node_->requires_grad)
    throw UsageError("loss is not connected to any tensor that requires a gradient");

  // Iterative post-order DFS; reversed, it lists every node after all its consumers.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child != nullptr && child->requires_grad && seen.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* n : order)
    if (n->leaf && n->has_grad)
      throw UsageError(
          "backward would accumulate into a gradient from an earlier pass; call zero_grad() first");

  for (detail::Node* n : order) {
    n->grad.assign(n->data.size(), 0.0);
    n->has_grad = true;
  }
  node_->grad[0] = 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->leaf || !n->backward) continue;
    GradSink sink(*n);
    n->backward(n->grad, sink);
  }
}

bool GradSink::wants(std::size_t input) const {
  return input < node_.inputs.size() && node_.inputs[input] &&
         node_.inputs[input]->requires_grad;
}

std::span<double> GradSink::grad(std::size_t input) {
  detail::Node& in = *node_.inputs.at(input);
  if (!in.has_grad) {
    in.grad.assign(in.data.size(), 0.0);
    in.has_grad = true;
  }
  return in.grad;
}

}  // namespace cxr
