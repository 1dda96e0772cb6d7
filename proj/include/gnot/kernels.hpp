// SPDX-License-Identifier: Apache-2.0
//
// Dense inner kernels on raw row-major buffers.
//
// Every kernel exists twice with identical signatures: `serial` is the plain
// reference and `parallel` distributes independent output rows over OpenMP
// threads. Each output element is reduced in the same order in both variants,
// so results are bit-identical regardless of thread count.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace gnot::kernels {

/// Floor applied to the normalized-attention denominator.
inline constexpr double kAttentionDenominatorFloor = 1e-12;

namespace serial {

/// C[m,n] (+)= A[m,k] * B[k,n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate);
/// C[m,n] (+)= A[k,m]^T * B[k,n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate);
/// C[m,n] (+)= A[m,k] * B[n,k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate);

/// Row-wise softmax with max subtraction.
void softmax_rows(std::size_t rows, std::size_t cols, const double* in, double* out);

/// Softmax-free normalized attention evaluated pairwise, O(N*M*d). `q` and `k`
/// are raw rows; each is softmax-normalized over its features first. An empty
/// mask means every key is valid.
void normalized_attention_direct(std::size_t n, std::size_t m, std::size_t d, const double* q,
                                 const double* k, const double* v,
                                 std::span<const std::uint8_t> mask, double* out);

/// Same quantity through the key/value summaries S = sum k~ (x) v and
/// s = sum k~, O((N+M)*d^2).
void normalized_attention_factored(std::size_t n, std::size_t m, std::size_t d, const double* q,
                                   const double* k, const double* v,
                                   std::span<const std::uint8_t> mask, double* out);

}  // namespace serial

namespace parallel {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate);

void softmax_rows(std::size_t rows, std::size_t cols, const double* in, double* out);

void normalized_attention_direct(std::size_t n, std::size_t m, std::size_t d, const double* q,
                                 const double* k, const double* v,
                                 std::span<const std::uint8_t> mask, double* out);

void normalized_attention_factored(std::size_t n, std::size_t m, std::size_t d, const double* q,
                                   const double* k, const double* v,
                                   std::span<const std::uint8_t> mask, double* out);

}  // namespace parallel

}  // namespace gnot::kernels
