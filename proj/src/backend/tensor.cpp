#include "refinet/backend/tensor.hpp"

#include <unordered_set>
#include <utility>

namespace refinet {

std::string Shape::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
         std::to_string(w) + ")";
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
  return filled(shape, T(0), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::filled(Shape shape, T value, bool requires_grad) {
  return from_data(shape, std::vector<T>(shape.size(), value), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_data(Shape shape, std::vector<T> values, bool requires_grad) {
  if (shape.size() == 0) throw ShapeError("tensor dimensions must be positive, got " + shape.str());
  if (values.size() != shape.size())
    throw ShapeError("tensor of shape " + shape.str() + " needs " + std::to_string(shape.size()) +
                     " values, got " + std::to_string(values.size()));
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = shape;
  node->data = std::make_shared<std::vector<T>>(std::move(values));
  node->requires_grad = requires_grad;
  return BasicTensor(std::move(node));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
  return filled(Shape{}, value, requires_grad);
}

template <typename T>
T BasicTensor<T>::item() const {
  if (!shape().is_scalar()) throw ShapeError("item() on non-scalar tensor " + shape().str());
  return (*node_->data)[0];
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = node_->shape;
  node->data = node_->data;
  return BasicTensor(std::move(node));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  return from_data(shape(), std::vector<T>(data().begin(), data().end()));
}

template <typename T>
void backward(const BasicTensor<T>& loss) {
  if (!loss.defined()) throw ShapeError("backward() on an undefined tensor");
  if (!loss.shape().is_scalar())
    throw ShapeError("backward() needs a scalar loss, got shape " + loss.shape().str());
  using Node = detail::Node<T>;
  Node* root = loss.node().get();
  if (!root->requires_grad) return;

  // Post-order DFS over nodes that take part in differentiation.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  root->ensure_grad();
  root->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->backward) continue;  // leaf: keep the accumulated gradient
    if (!node->grad.empty()) node->backward(node->grad);
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
}

template <typename To, typename From>
BasicTensor<To> cast(const BasicTensor<From>& t, bool requires_grad) {
  std::vector<To> values(t.data().begin(), t.data().end());
  return BasicTensor<To>::from_data(t.shape(), std::move(values), requires_grad);
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template void backward<float>(const BasicTensor<float>&);
template void backward<double>(const BasicTensor<double>&);
template BasicTensor<double> cast<double, float>(const BasicTensor<float>&, bool);
template BasicTensor<float> cast<float, double>(const BasicTensor<double>&, bool);
template BasicTensor<float> cast<float, float>(const BasicTensor<float>&, bool);
template BasicTensor<double> cast<double, double>(const BasicTensor<double>&, bool);

}  // namespace refinet
