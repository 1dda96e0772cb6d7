// SPDX-License-Identifier: Apache-2.0
#include "gnot/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace gnot::kernels::parallel {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kMinParallelWork = std::size_t{1} << 16;

using Index = std::ptrdiff_t;

}  // namespace

namespace {

// C (m x n) += A (m x k) * B (k x n) with A addressed as a[i*si + p*sp], so
// the same register-blocked loop serves both A and A^T. Every entry of C
// sums its k products in ascending p, which keeps results identical to the
// straightforward loops in the serial reference.
void gemm_blocked(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t si,
                  std::size_t sp, const double* b, double* c) {
  constexpr std::size_t kMr = 4, kNr = 16;
  const std::size_t row_blocks = (m + kMr - 1) / kMr;
  const bool par = m * n * k >= kMinParallelWork && row_blocks > 1;
#pragma omp parallel for schedule(static) if (par)
  for (Index bb = 0; bb < static_cast<Index>(row_blocks); ++bb) {
    const std::size_t i0 = static_cast<std::size_t>(bb) * kMr;
    const std::size_t i1 = std::min(m, i0 + kMr);
    std::size_t j0 = 0;
    if (i1 - i0 == kMr) {
      for (; j0 + kNr <= n; j0 += kNr) {
        double acc[kMr][kNr];
        for (std::size_t r = 0; r < kMr; ++r)
          for (std::size_t jj = 0; jj < kNr; ++jj) acc[r][jj] = c[(i0 + r) * n + j0 + jj];
        for (std::size_t p = 0; p < k; ++p) {
          const double* bp = b + p * n + j0;
          for (std::size_t r = 0; r < kMr; ++r) {
            const double av = a[(i0 + r) * si + p * sp];
#pragma omp simd
            for (std::size_t jj = 0; jj < kNr; ++jj) acc[r][jj] += av * bp[jj];
          }
        }
        for (std::size_t r = 0; r < kMr; ++r)
          for (std::size_t jj = 0; jj < kNr; ++jj) c[(i0 + r) * n + j0 + jj] = acc[r][jj];
      }
    }
    for (std::size_t i = i0; i < i1; ++i) {
      double* ci = c + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = a[i * si + p * sp];
        const double* bp = b + p * n;
        for (std::size_t j = j0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  }
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  gemm_blocked(m, n, k, a, k, 1, b, c);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  gemm_blocked(m, n, k, a, 1, m, b, c);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
  // The serial form finishes each dot product before adding it to C, so the
  // products go to a scratch matrix first when accumulating.
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  if (!accumulate) {
    std::fill(c, c + m * n, 0.0);
    gemm_blocked(m, n, k, a, k, 1, bt.data(), c);
    return;
  }
  std::vector<double> tmp(m * n, 0.0);
  gemm_blocked(m, n, k, a, k, 1, bt.data(), tmp.data());
  for (std::size_t i = 0; i < m * n; ++i) c[i] += tmp[i];
}

void softmax_rows(std::size_t rows, std::size_t cols, const double* in, double* out) {
  const bool par = rows * cols >= kMinParallelWork / 8;
#pragma omp parallel for schedule(static) if (par)
  for (Index rr = 0; rr < static_cast<Index>(rows); ++rr) {
    const auto r = static_cast<std::size_t>(rr);
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
  const bool par = n * m * d >= kMinParallelWork;
#pragma omp parallel if (par)
  {
    std::vector<double> w(m);
#pragma omp for schedule(static)
    for (Index tt = 0; tt < static_cast<Index>(n); ++tt) {
      const auto t = static_cast<std::size_t>(tt);
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
  std::vector<double> s_mat(d * d), s_vec(d, 0.0);
  gemm_tn(d, d, m, kn.data(), v, s_mat.data(), false);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t a = 0; a < d; ++a) s_vec[a] += kn[i * d + a];

  gemm_nn(n, d, d, qn.data(), s_mat.data(), out, false);
  const bool par = n * d >= kMinParallelWork / 8;
#pragma omp parallel for schedule(static) if (par)
  for (Index tt = 0; tt < static_cast<Index>(n); ++tt) {
    const auto t = static_cast<std::size_t>(tt);
    double den = 0.0;
    for (std::size_t a = 0; a < d; ++a) den += qn[t * d + a] * s_vec[a];
    const double inv = 1.0 / std::max(den, kAttentionDenominatorFloor);
    for (std::size_t j = 0; j < d; ++j) out[t * d + j] *= inv;
  }
}

}  // namespace gnot::kernels::parallel
