// SPDX-License-Identifier: Apache-2.0
//
// Softmax-free normalized attention.
//
// Queries and keys are first softmax-normalized along their feature
// dimension; the attention weight of key i for query t is then
//   w_ti = (q~_t . k~_i) / sum_j (q~_t . k~_j),
// which is nonnegative and sums to one over the valid keys. The factored form
// evaluates the same output through S = sum_i k~_i (x) v_i and s = sum_i k~_i
// in time linear in both sequence lengths.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "gnot/tensor.hpp"

namespace gnot::attention {

/// Validity flags for the positions of a padded sequence.
struct SeqMask {
  std::vector<std::uint8_t> valid;

  static SeqMask all(std::size_t n) { return {std::vector<std::uint8_t>(n, 1)}; }
  std::size_t size() const { return valid.size(); }
  std::size_t count() const;
  bool all_valid() const { return count() == size(); }
};

/// Temperature of the classical softmax attention used as a reference.
struct OracleConfig {
  double tau = 1.0;
  static OracleConfig for_width(std::size_t d_head) {
    return {std::sqrt(static_cast<double>(d_head))};
  }
};

enum class Form { Direct, Factored };

/// Classical attention z_t = sum_i softmax_i(q_t.k_i / tau) v_i. Value-only,
/// O(N*M); kept as a test and benchmark reference.
Tensor softmax_attention_oracle(const Tensor& q, const Tensor& k, const Tensor& v,
                                const OracleConfig& cfg);

/// Normalized attention from raw q[N,d], k[M,d], v[M,dv]; masked keys are
/// excluded from numerator and denominator.
Tensor normalized_attention_direct(const Tensor& q, const Tensor& k, const Tensor& v,
                                   const SeqMask& mask);
Tensor normalized_attention_factored(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const SeqMask& mask);
Tensor normalized_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const SeqMask& mask, Form form);

/// Same as above but for already-normalized q~ and k~.
Tensor attend_normalized(const Tensor& q_norm, const Tensor& k_norm, const Tensor& v,
                         const SeqMask& mask, Form form);

/// Explicit weight matrix W[N,M] for raw q and k; rows lie on the simplex.
Tensor attention_weights(const Tensor& q, const Tensor& k, const SeqMask& mask);

/// Splits the trailing dimension into `heads` equal column blocks.
std::vector<Tensor> split_heads(const Tensor& z, std::size_t heads);
Tensor merge_heads(const std::vector<Tensor>& parts);

/// Per-head normalized attention: q, k, v are split into `heads` blocks, each
/// block is normalized and attended independently, then concatenated.
Tensor multihead_normalized_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                      const SeqMask& mask, std::size_t heads,
                                      Form form = Form::Factored);

}  // namespace gnot::attention
