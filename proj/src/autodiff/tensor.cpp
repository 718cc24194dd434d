#include "classic/autodiff/tensor.hpp"

#include <functional>
#include <numeric>

#include "classic/error.hpp"

namespace classic::ad {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  node_ = std::make_shared<TensorNode>();
  node_->shape = std::move(shape);
  node_->values = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  return node_->values[0];
}

std::span<double> Tensor::grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->values.size(), 0.0);
  return node_->grad;
}

std::span<const double> Tensor::grad() const {
  if (node_->grad.empty()) node_->grad.assign(node_->values.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

Tensor Tensor::clone() const {
  return Tensor(node_->shape, node_->values, node_->requires_grad);
}

}  // namespace classic::ad
