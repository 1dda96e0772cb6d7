// SPDX-License-Identifier: Apache-2.0
//
// Shared test helpers: seeded generators, reference loops and a
// central-difference gradient checker.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gnot/data.hpp"
#include "gnot/matrix.hpp"
#include "gnot/tensor.hpp"

namespace testing {

using gnot::Matrix;
using gnot::Tensor;

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  }
  std::vector<double> values(std::size_t n, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (double& x : v) x = uniform(lo, hi);
    return v;
  }
  Matrix matrix(std::size_t r, std::size_t c, double lo = -2.0, double hi = 2.0) {
    return Matrix(r, c, values(r * c, lo, hi));
  }
  Tensor constant(std::size_t r, std::size_t c, double lo = -2.0, double hi = 2.0) {
    return Tensor::constant({r, c}, values(r * c, lo, hi));
  }
  Tensor param(std::size_t r, std::size_t c, double lo = -2.0, double hi = 2.0) {
    return Tensor::parameter({r, c}, values(r * c, lo, hi));
  }
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    std::shuffle(p.begin(), p.end(), rng);
    return p;
  }
};

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols; ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix permute_rows(const Matrix& m, const std::vector<std::size_t>& perm) {
  Matrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < perm.size(); ++i)
    std::copy(m.row(perm[i]).begin(), m.row(perm[i]).end(), out.row(i).begin());
  return out;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// max |a-b| / max(max |b|, tiny)
inline double max_rel_diff(std::span<const double> a, std::span<const double> b) {
  double scale = 0.0;
  for (double x : b) scale = std::max(scale, std::abs(x));
  return max_abs_diff(a, b) / std::max(scale, 1e-300);
}

inline std::vector<double> softmax_ref(std::span<const double> x) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  std::vector<double> y(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (y[i] = std::exp(x[i] - mx));
  for (double& v : y) v /= s;
  return y;
}

/// Direct double sum of softmax-free normalized attention, raw q/k rows.
inline Matrix normalized_attention_ref(const Matrix& q, const Matrix& k, const Matrix& v,
                                       const std::vector<std::uint8_t>& mask = {}) {
  Matrix out(q.rows, v.cols);
  std::vector<std::vector<double>> kn;
  for (std::size_t i = 0; i < k.rows; ++i) kn.push_back(softmax_ref(k.row(i)));
  for (std::size_t t = 0; t < q.rows; ++t) {
    const auto qn = softmax_ref(q.row(t));
    double den = 0.0;
    std::vector<double> w(k.rows, 0.0);
    for (std::size_t i = 0; i < k.rows; ++i) {
      if (!mask.empty() && !mask[i]) continue;
      for (std::size_t a = 0; a < qn.size(); ++a) w[i] += qn[a] * kn[i][a];
      den += w[i];
    }
    for (std::size_t i = 0; i < k.rows; ++i)
      for (std::size_t j = 0; j < v.cols; ++j) out(t, j) += w[i] / den * v(i, j);
  }
  return out;
}

struct GradReport {
  double worst = 0.0;  // worst error, relative or absolute per the rule below
  bool pass = true;
};

/// Compares every gradient entry of `leaves` after backward(f()) with central
/// differences. Relative error applies where |grad| >= 1e-2, absolute below.
inline GradReport check_gradients(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                                  double h = 1e-5, double rel_tol = 1e-5, double abs_tol = 1e-7) {
  for (auto& l : leaves) l.zero_grad();
  gnot::backward(f());
  GradReport rep;
  for (auto& leaf : leaves) {
    std::vector<double> g(leaf.grad().begin(), leaf.grad().end());
    if (g.empty()) g.assign(leaf.numel(), 0.0);
    auto vals = leaf.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double x0 = vals[i];
      vals[i] = x0 + h;
      const double fp = f().item();
      vals[i] = x0 - h;
      const double fm = f().item();
      vals[i] = x0;
      const double num = (fp - fm) / (2 * h);
      const double mag = std::max(std::abs(num), std::abs(g[i]));
      if (mag < 1e-2) {
        const double e = std::abs(num - g[i]);
        rep.pass = rep.pass && e <= abs_tol;
        rep.worst = std::max(rep.worst, e / abs_tol * rel_tol);
      } else {
        const double e = std::abs(num - g[i]) / mag;
        rep.pass = rep.pass && e <= rel_tol;
        rep.worst = std::max(rep.worst, e);
      }
    }
  }
  return rep;
}

/// Scalar probe sum(x * w) with fixed random weights, so every output
/// element carries a distinct gradient.
inline Tensor probe(const Tensor& x, std::uint64_t seed = 99) {
  Gen g(seed);
  Tensor w = Tensor::constant(x.shape(), g.values(x.numel(), -1.0, 1.0));
  return gnot::sum_all(gnot::mul(x, w));
}

}  // namespace testing
