// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numbers>

#include "gnot/errors.hpp"
#include "gnot/kernels.hpp"
#include "gnot/tensor.hpp"

namespace gnot {

namespace kp = kernels::parallel;
using detail::Node;

namespace {

using BackwardFn = std::function<void(Node&)>;

Tensor make_op(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
               BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool grad = std::any_of(inputs.begin(), inputs.end(),
                                [](const Tensor& t) { return t.requires_grad(); });
  if (grad) {
    node->requires_grad = true;
    for (auto& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// Gradient buffer of input `i`, or nullptr when that input is not differentiated.
double* input_grad(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  return in.requires_grad ? in.ensure_grad().data() : nullptr;
}

const std::vector<double>& input_value(const Node& self, std::size_t i) {
  return self.inputs[i]->value;
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                       " and " + shape_string(b.shape()));
}

void require_matrix(const char* op, const Tensor& a) {
  if (a.shape().size() > 2)
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
}

}  // namespace

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) shape_mismatch("matmul", a, b);
  std::vector<double> out(m * n);
  kp::gemm_nn(m, n, k, a.values().data(), b.values().data(), out.data(), false);
  return make_op({m, n}, std::move(out), {a, b}, [m, n, k](Node& self) {
    const double* g = self.grad.data();
    if (double* ga = input_grad(self, 0))  // dA += G B^T
      kp::gemm_nt(m, k, n, g, input_value(self, 1).data(), ga, true);
    if (double* gb = input_grad(self, 1))  // dB += A^T G
      kp::gemm_tn(k, n, m, input_value(self, 0).data(), g, gb, true);
  });
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix("matmul_tn", a);
  require_matrix("matmul_tn", b);
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  if (b.rows() != k) shape_mismatch("matmul_tn", a, b);
  std::vector<double> out(m * n);
  kp::gemm_tn(m, n, k, a.values().data(), b.values().data(), out.data(), false);
  return make_op({m, n}, std::move(out), {a, b}, [m, n, k](Node& self) {
    const double* g = self.grad.data();
    if (double* ga = input_grad(self, 0))  // dA[k,m] += B G^T
      kp::gemm_nt(k, m, n, input_value(self, 1).data(), g, ga, true);
    if (double* gb = input_grad(self, 1))  // dB[k,n] += A G
      kp::gemm_nn(k, n, m, input_value(self, 0).data(), g, gb, true);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix("matmul_nt", a);
  require_matrix("matmul_nt", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) shape_mismatch("matmul_nt", a, b);
  std::vector<double> out(m * n);
  kp::gemm_nt(m, n, k, a.values().data(), b.values().data(), out.data(), false);
  return make_op({m, n}, std::move(out), {a, b}, [m, n, k](Node& self) {
    const double* g = self.grad.data();
    if (double* ga = input_grad(self, 0))  // dA[m,k] += G B
      kp::gemm_nn(m, k, n, g, input_value(self, 1).data(), ga, true);
    if (double* gb = input_grad(self, 1))  // dB[n,k] += G^T A
      kp::gemm_tn(n, k, m, g, input_value(self, 0).data(), gb, true);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch("add", a, b);
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& g = self.grad;
    for (std::size_t k = 0; k < 2; ++k)
      if (double* gi = input_grad(self, k))
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch("sub", a, b);
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& g = self.grad;
    if (double* ga = input_grad(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (double* gb = input_grad(self, 1))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch("mul", a, b);
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& g = self.grad;
    const auto& av = input_value(self, 0);
    const auto& bv = input_value(self, 1);
    if (double* ga = input_grad(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    if (double* gb = input_grad(self, 1))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& x : out) x *= factor;
  return make_op(a.shape(), std::move(out), {a}, [factor](Node& self) {
    const auto& g = self.grad;
    if (double* ga = input_grad(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  const std::size_t n = a.cols();
  if (row.numel() != n) shape_mismatch("add_row", a, row);
  const std::size_t rows = a.rows();
  std::vector<double> out(a.values().begin(), a.values().end());
  auto rv = row.values();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += rv[j];
  return make_op(a.shape(), std::move(out), {a, row}, [rows, n](Node& self) {
    const auto& g = self.grad;
    if (double* ga = input_grad(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (double* gr = input_grad(self, 1))
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
  });
}

Tensor mul_col(const Tensor& a, const Tensor& col) {
  const std::size_t rows = a.rows(), n = a.cols();
  if (col.numel() != rows) shape_mismatch("mul_col", a, col);
  std::vector<double> out(a.values().begin(), a.values().end());
  auto cv = col.values();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] *= cv[i];
  return make_op(a.shape(), std::move(out), {a, col}, [rows, n](Node& self) {
    const auto& g = self.grad;
    const auto& av = input_value(self, 0);
    const auto& cv = input_value(self, 1);
    if (double* ga = input_grad(self, 0))
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] * cv[i];
    if (double* gc = input_grad(self, 1))
      for (std::size_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * av[i * n + j];
        gc[i] += acc;
      }
  });
}

Tensor div_col(const Tensor& a, const Tensor& col, double floor) {
  const std::size_t rows = a.rows(), n = a.cols();
  if (col.numel() != rows) shape_mismatch("div_col", a, col);
  std::vector<double> out(a.values().begin(), a.values().end());
  auto cv = col.values();
  for (std::size_t i = 0; i < rows; ++i) {
    const double den = std::max(cv[i], floor);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= den;
  }
  return make_op(a.shape(), std::move(out), {a, col}, [rows, n, floor](Node& self) {
    const auto& g = self.grad;
    const auto& av = input_value(self, 0);
    const auto& cv = input_value(self, 1);
    double* ga = input_grad(self, 0);
    double* gc = input_grad(self, 1);
    for (std::size_t i = 0; i < rows; ++i) {
      const bool floored = cv[i] < floor;
      const double den = floored ? floor : cv[i];
      const double inv = 1.0 / den;
      if (ga)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] * inv;
      if (gc && !floored) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * av[i * n + j];
        gc[i] -= acc * inv * inv;
      }
    }
  });
}

Tensor sum_rows(const Tensor& a) {
  const std::size_t rows = a.rows(), n = a.cols();
  std::vector<double> out(n, 0.0);
  auto av = a.values();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += av[i * n + j];
  return make_op({1, n}, std::move(out), {a}, [rows, n](Node& self) {
    const auto& g = self.grad;
    if (double* ga = input_grad(self, 0))
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j];
  });
}

Tensor sum_cols(const Tensor& a) {
  const std::size_t rows = a.rows(), n = a.cols();
  std::vector<double> out(rows, 0.0);
  auto av = a.values();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += av[i * n + j];
  return make_op({rows, 1}, std::move(out), {a}, [rows, n](Node& self) {
    const auto& g = self.grad;
    if (double* ga = input_grad(self, 0))
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i];
  });
}

Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.values()) acc += x;
  return make_op({1}, {acc}, {a}, [](Node& self) {
    const double g = self.grad[0];
    if (double* ga = input_grad(self, 0)) {
      const std::size_t n = self.inputs[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g;
    }
  });
}

Tensor gelu(const Tensor& x) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = gelu_value(xv[i]);
  return make_op(x.shape(), std::move(out), {x}, [](Node& self) {
    const auto& g = self.grad;
    const auto& xv = input_value(self, 0);
    if (double* gx = input_grad(self, 0)) {
      constexpr double kInvSqrt2Pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double cdf = 0.5 * (1.0 + std::erf(xv[i] * std::numbers::sqrt2 / 2.0));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xv[i] * xv[i]);
        gx[i] += g[i] * (cdf + xv[i] * pdf);
      }
    }
  });
}

Tensor softmax_lastdim(const Tensor& x) {
  const std::size_t rows = x.rows(), n = x.cols();
  std::vector<double> out(x.numel());
  kp::softmax_rows(rows, n, x.values().data(), out.data());
  return make_op(x.shape(), std::move(out), {x}, [rows, n](Node& self) {
    const auto& g = self.grad;
    const auto& y = self.value;
    if (double* gx = input_grad(self, 0))
      for (std::size_t i = 0; i < rows; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
      }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t rows = x.rows(), n = x.cols();
  if (gamma.numel() != n) shape_mismatch("layer_norm", x, gamma);
  if (beta.numel() != n) shape_mismatch("layer_norm", x, beta);
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> rstd(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* xi = xv.data() + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += xi[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= static_cast<double>(n);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (xi[j] - mean) * rstd[i];
      out[i * n + j] = xhat[i * n + j] * gv[j] + bv[j];
    }
  }
  return make_op(x.shape(), std::move(out), {x, gamma, beta},
                 [rows, n, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
                   const auto& g = self.grad;
                   const auto& gv = input_value(self, 1);
                   double* gx = input_grad(self, 0);
                   double* gg = input_grad(self, 1);
                   double* gb = input_grad(self, 2);
                   const double inv_n = 1.0 / static_cast<double>(n);
                   for (std::size_t i = 0; i < rows; ++i) {
                     const double* gi = g.data() + i * n;
                     const double* hi = xhat.data() + i * n;
                     if (gg)
                       for (std::size_t j = 0; j < n; ++j) gg[j] += gi[j] * hi[j];
                     if (gb)
                       for (std::size_t j = 0; j < n; ++j) gb[j] += gi[j];
                     if (gx) {
                       double sum_d = 0.0, sum_dh = 0.0;
                       for (std::size_t j = 0; j < n; ++j) {
                         const double d = gi[j] * gv[j];
                         sum_d += d;
                         sum_dh += d * hi[j];
                       }
                       for (std::size_t j = 0; j < n; ++j) {
                         const double d = gi[j] * gv[j];
                         gx[i * n + j] += rstd[i] * (d - inv_n * sum_d - hi[j] * inv_n * sum_dh);
                       }
                     }
                   }
                 });
}

Tensor mask_rows(const Tensor& a, std::span<const std::uint8_t> mask) {
  const std::size_t rows = a.rows(), n = a.cols();
  if (mask.size() != rows)
    throw DimensionError("mask_rows: mask of length " + std::to_string(mask.size()) +
                         " for tensor " + shape_string(a.shape()));
  std::vector<std::uint8_t> keep(mask.begin(), mask.end());
  std::vector<double> out(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < rows; ++i)
    if (!keep[i]) std::fill(out.begin() + i * n, out.begin() + (i + 1) * n, 0.0);
  return make_op(a.shape(), std::move(out), {a}, [rows, n, keep = std::move(keep)](Node& self) {
    const auto& g = self.grad;
    if (double* ga = input_grad(self, 0))
      for (std::size_t i = 0; i < rows; ++i)
        if (keep[i])
          for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t width) {
  const std::size_t rows = a.rows(), n = a.cols();
  if (width == 0 || start + width > n)
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + "," +
                         std::to_string(start + width) + ") out of range for " +
                         shape_string(a.shape()));
  auto av = a.values();
  std::vector<double> out(rows * width);
  for (std::size_t i = 0; i < rows; ++i)
    std::copy_n(av.data() + i * n + start, width, out.data() + i * width);
  return make_op({rows, width}, std::move(out), {a}, [rows, n, start, width](Node& self) {
    const auto& g = self.grad;
    if (double* ga = input_grad(self, 0))
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < width; ++j) ga[i * n + start + j] += g[i * width + j];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_mismatch("concat_cols", parts[0], p);
    offsets.push_back(total);
    total += p.cols();
  }
  std::vector<double> out(rows * total);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t w = parts[k].cols();
    auto pv = parts[k].values();
    for (std::size_t i = 0; i < rows; ++i)
      std::copy_n(pv.data() + i * w, w, out.data() + i * total + offsets[k]);
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_op({rows, total}, std::move(out), std::move(inputs),
                 [rows, total, offsets](Node& self) {
                   const auto& g = self.grad;
                   for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                     double* gk = input_grad(self, k);
                     if (!gk) continue;
                     const std::size_t w = self.inputs[k]->shape.back();
                     for (std::size_t i = 0; i < rows; ++i)
                       for (std::size_t j = 0; j < w; ++j)
                         gk[i * w + j] += g[i * total + offsets[k] + j];
                   }
                 });
}

}  // namespace gnot
