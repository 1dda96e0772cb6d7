// SPDX-License-Identifier: Apache-2.0
#include "gnot/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "gnot/errors.hpp"

namespace gnot {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace detail {

std::vector<double>& Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

}  // namespace detail

namespace {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> values, bool grad) {
  for (std::size_t e : shape)
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  if (shape_numel(shape) != values.size())
    throw DimensionError("shape " + shape_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = grad;
  return node;
}

const detail::Node& deref(const std::shared_ptr<detail::Node>& n) {
  if (!n) throw ContractError("use of an undefined tensor");
  return *n;
}

}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::constant(const Matrix& m) { return constant({m.rows, m.cols}, m.data); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), true));
}

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = shape_numel(shape);
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double value) { return constant({1}, {value}); }

const Shape& Tensor::shape() const { return deref(node_).shape; }
std::size_t Tensor::numel() const { return deref(node_).value.size(); }

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  return s.empty() ? 1 : s.back();
}

std::size_t Tensor::rows() const { return numel() / cols(); }

std::span<const double> Tensor::values() const { return deref(node_).value; }

std::span<double> Tensor::mutable_values() {
  if (!is_leaf()) throw ContractError("only leaf tensors may be written in place");
  return node_->value;
}

std::span<const double> Tensor::grad() const { return deref(node_).grad; }
bool Tensor::requires_grad() const { return deref(node_).requires_grad; }
bool Tensor::is_leaf() const { return !deref(node_).backward; }

void Tensor::zero_grad() {
  auto& g = node_->grad;
  std::fill(g.begin(), g.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t i, std::size_t j) const { return values()[i * cols() + j]; }

Matrix Tensor::to_matrix() const { return Matrix(rows(), cols(), deref(node_).value); }

Tensor Tensor::detach() const { return constant(shape(), deref(node_).value); }

Graph::Graph(const Tensor& root) : root_(root) {
  // Iterative post-order DFS; recursion would overflow on long chains.
  std::unordered_set<const detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  detail::Node* start = root.node().get();
  if (!start || !start->requires_grad) return;
  stack.emplace_back(start, 0);
  visited.insert(start);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order_.push_back(node);
      stack.pop_back();
    }
  }
}

void Graph::backward() {
  if (order_.empty()) return;
  detail::Node* root = root_.node().get();
  for (double& g : root->ensure_grad()) g += 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  Graph(loss).backward();
}

}  // namespace gnot
