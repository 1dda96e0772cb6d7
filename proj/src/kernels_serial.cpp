// SPDX-License-Identifier: Apache-2.0
#include "gnot/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace gnot::kernels::serial {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = ap[i];
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
  }
}

void softmax_rows(std::size_t rows, std::size_t cols, const double* in, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in + r * cols;
    double* y = out + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < cols; ++j) y[j] *= inv;
  }
}

void normalized_attention_direct(std::size_t n, std::size_t m, std::size_t d, const double* q,
                                 const double* k, const double* v,
                                 std::span<const std::uint8_t> mask, double* out) {
  std::vector<double> qn(n * d), kn(m * d);
  softmax_rows(n, d, q, qn.data());
  softmax_rows(m, d, k, kn.data());
  std::vector<double> w(m);
  for (std::size_t t = 0; t < n; ++t) {
    const double* qt = qn.data() + t * d;
    double* zt = out + t * d;
    std::fill(zt, zt + d, 0.0);
    double den = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      w[i] = 0.0;
      if (!mask.empty() && !mask[i]) continue;
      const double* ki = kn.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) w[i] += qt[j] * ki[j];
      den += w[i];
    }
    den = std::max(den, kAttentionDenominatorFloor);
    for (std::size_t i = 0; i < m; ++i) {
      if (!mask.empty() && !mask[i]) continue;
      const double wi = w[i] / den;
      const double* vi = v + i * d;
      for (std::size_t j = 0; j < d; ++j) zt[j] += wi * vi[j];
    }
  }
}

void normalized_attention_factored(std::size_t n, std::size_t m, std::size_t d, const double* q,
                                   const double* k, const double* v,
                                   std::span<const std::uint8_t> mask, double* out) {
  std::vector<double> qn(n * d), kn(m * d);
  softmax_rows(n, d, q, qn.data());
  softmax_rows(m, d, k, kn.data());
  if (!mask.empty()) {
    for (std::size_t i = 0; i < m; ++i)
      if (!mask[i]) std::fill(kn.begin() + i * d, kn.begin() + (i + 1) * d, 0.0);
  }
  // S[a,b] = sum_i kn[i,a] v[i,b];  s[a] = sum_i kn[i,a]
  std::vector<double> s_mat(d * d), s_vec(d, 0.0);
  gemm_tn(d, d, m, kn.data(), v, s_mat.data(), false);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t a = 0; a < d; ++a) s_vec[a] += kn[i * d + a];

  gemm_nn(n, d, d, qn.data(), s_mat.data(), out, false);
  for (std::size_t t = 0; t < n; ++t) {
    double den = 0.0;
    for (std::size_t a = 0; a < d; ++a) den += qn[t * d + a] * s_vec[a];
    const double inv = 1.0 / std::max(den, kAttentionDenominatorFloor);
    for (std::size_t j = 0; j < d; ++j) out[t * d + j] *= inv;
  }
}

}  // namespace gnot::kernels::serial
