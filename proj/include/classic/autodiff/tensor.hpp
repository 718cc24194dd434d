#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace classic::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Storage shared by every handle to the same tensor.
struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
};

/// Dense row-major tensor of 64-bit floats. Copies are shallow: two handles
/// copied from each other refer to the same values and gradient.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->values.size(); }

  std::span<const double> values() const { return node_->values; }
  std::span<double> mutable_values() { return node_->values; }
  double item() const;
  double at(std::size_t flat_index) const { return node_->values.at(flat_index); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }

  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient buffer; allocated as zeros on first access.
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  /// Deep copy without gradient or tape history.
  Tensor clone() const;

  const std::shared_ptr<TensorNode>& node() const { return node_; }
  bool same_as(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<TensorNode> node_;
};

}  // namespace classic::ad
