// SPDX-License-Identifier: Apache-2.0
//
// Dense f64 tensors with define-by-run reverse-mode differentiation.
//
// A Tensor is a shared handle to a node. Nodes produced by an operation keep
// their inputs alive only when at least one input requires a gradient, so a
// forward pass over non-differentiable leaves allocates no graph state.
//
// Operations treat a tensor as a matrix of rows() x cols(), where cols() is
// the trailing extent and rows() the product of the leading extents.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gnot/matrix.hpp"

namespace gnot {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Propagates this node's grad into its inputs' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor constant(const Matrix& m);
  /// Leaf that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  /// Writable storage; only allowed on leaves.
  std::span<double> mutable_values();
  /// Empty when no gradient has been accumulated.
  std::span<const double> grad() const;
  bool requires_grad() const;
  bool is_leaf() const;
  void zero_grad();

  double item() const;
  double at(std::size_t i, std::size_t j) const;
  Matrix to_matrix() const;
  /// Value copy with no history.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Topologically ordered record of the differentiable part of a computation.
class Graph {
 public:
  /// Collects every node reachable from `root` that requires a gradient.
  explicit Graph(const Tensor& root);

  std::size_t size() const { return order_.size(); }
  /// Seeds d(root)/d(root) = 1 and visits each node once in reverse order.
  void backward();

 private:
  Tensor root_;
  std::vector<detail::Node*> order_;
};

/// Populates grad on every requires-grad leaf reachable from a scalar loss.
/// Gradients accumulate; callers zero them between steps.
void backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Differentiable operations.

Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]x[k,n]
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // [k,m]^T x [k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k]x[n,k]^T

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// a[N,n] + row[1,n] broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
/// a[N,n] * col[N,1] broadcast over columns.
Tensor mul_col(const Tensor& a, const Tensor& col);
/// a[N,n] / max(col[N,1], floor).
Tensor div_col(const Tensor& a, const Tensor& col, double floor);

Tensor sum_rows(const Tensor& a);  // [N,n] -> [1,n]
Tensor sum_cols(const Tensor& a);  // [N,n] -> [N,1]
Tensor sum_all(const Tensor& a);   // -> [1]

Tensor gelu(const Tensor& x);
Tensor softmax_lastdim(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Zeroes rows whose mask entry is 0. The mask is not differentiated.
Tensor mask_rows(const Tensor& a, std::span<const std::uint8_t> mask);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t width);
Tensor concat_cols(std::span<const Tensor> parts);

/// Exact erf-form GELU on a scalar, shared with tests.
double gelu_value(double x);

}  // namespace gnot
