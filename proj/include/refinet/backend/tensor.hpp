#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "refinet/backend/errors.hpp"

namespace refinet {

/// Dense NCHW shape. One-dimensional vectors (biases) are stored as
/// (len, 1, 1, 1); scalars as (1, 1, 1, 1).
struct Shape {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  constexpr std::size_t size() const { return n * c * h * w; }
  constexpr std::size_t plane() const { return h * w; }
  constexpr std::size_t per_sample() const { return c * h * w; }
  constexpr bool is_scalar() const { return size() == 1; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string str() const;
};

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  // Storage is shared so detached views alias the same values.
  std::shared_ptr<std::vector<T>> data;
  std::vector<T> grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Receives this node's accumulated gradient and pushes it to parents.
  std::function<void(std::span<const T>)> backward;

  void ensure_grad() {
    if (grad.empty()) grad.assign(shape.size(), T(0));
  }
};

}  // namespace detail

/// Handle to a node in the recorded computation graph. Copies share the
/// node; use clone() for a deep copy of the values.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  BasicTensor() = default;
  explicit BasicTensor(NodePtr node) : node_(std::move(node)) {}

  static BasicTensor zeros(Shape shape, bool requires_grad = false);
  static BasicTensor filled(Shape shape, T value, bool requires_grad = false);
  static BasicTensor from_data(Shape shape, std::vector<T> values, bool requires_grad = false);
  static BasicTensor scalar(T value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->shape.size(); }

  std::span<T> data() { return {node_->data->data(), node_->data->size()}; }
  std::span<const T> data() const { return {node_->data->data(), node_->data->size()}; }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }

  /// Leaf view over the same storage, excluded from gradient tracking.
  BasicTensor detach() const;
  /// Independent copy of the values (leaf, no grad).
  BasicTensor clone() const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
/// reachable tensor that has requires_grad set and was created as a leaf.
template <typename T>
void backward(const BasicTensor<T>& loss);

/// Convert between precisions (used by the 64-bit verification path).
template <typename To, typename From>
BasicTensor<To> cast(const BasicTensor<From>& t, bool requires_grad = false);

}  // namespace refinet
