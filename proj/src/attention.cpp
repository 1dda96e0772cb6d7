// SPDX-License-Identifier: Apache-2.0
#include "gnot/attention.hpp"

#include <algorithm>
#include <numeric>

#include "gnot/errors.hpp"
#include "gnot/kernels.hpp"

namespace gnot::attention {

std::size_t SeqMask::count() const {
  return static_cast<std::size_t>(std::count_if(valid.begin(), valid.end(),
                                                 [](std::uint8_t v) { return v != 0; }));
}

namespace {

void check_qkv(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.cols() != k.cols())
    throw DimensionError("attention: query width " + std::to_string(q.cols()) +
                         " differs from key width " + std::to_string(k.cols()));
  if (k.rows() != v.rows())
    throw DimensionError("attention: " + std::to_string(k.rows()) + " keys but " +
                         std::to_string(v.rows()) + " values");
}

// Mask with one entry per key; throws when nothing is attendable.
SeqMask resolve_mask(const SeqMask& mask, std::size_t keys) {
  if (keys == 0) throw ContractError("attention over an empty key sequence");
  if (mask.valid.empty()) return SeqMask::all(keys);
  if (mask.size() != keys)
    throw DimensionError("attention: mask length " + std::to_string(mask.size()) + " for " +
                         std::to_string(keys) + " keys");
  if (mask.count() == 0) throw ContractError("attention: every key position is masked");
  return mask;
}

}  // namespace

Tensor softmax_attention_oracle(const Tensor& q, const Tensor& k, const Tensor& v,
                                const OracleConfig& cfg) {
  check_qkv(q, k, v);
  if (k.rows() == 0) throw ContractError("softmax attention over an empty key sequence");
  if (!(cfg.tau > 0.0)) throw ConfigError("softmax attention temperature must be positive");
  const std::size_t n = q.rows(), m = k.rows(), d = q.cols(), dv = v.cols();
  auto qv = q.values(), kv = k.values(), vv = v.values();
  std::vector<double> out(n * dv, 0.0), logits(m);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += qv[t * d + j] * kv[i * d + j];
      logits[i] = dot / cfg.tau;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& l : logits) sum += (l = std::exp(l - mx));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < dv; ++j) out[t * dv + j] += logits[i] / sum * vv[i * dv + j];
  }
  return Tensor::constant({n, dv}, std::move(out));
}

Tensor attend_normalized(const Tensor& q_norm, const Tensor& k_norm, const Tensor& v,
                         const SeqMask& mask, Form form) {
  check_qkv(q_norm, k_norm, v);
  const SeqMask keys = resolve_mask(mask, k_norm.rows());
  const Tensor k_valid = keys.all_valid() ? k_norm : mask_rows(k_norm, keys.valid);
  if (form == Form::Direct) {
    const Tensor w = matmul_nt(q_norm, k_valid);  // [N,M]
    return matmul(div_col(w, sum_cols(w), kernels::kAttentionDenominatorFloor), v);
  }
  const Tensor s_mat = matmul_tn(k_valid, v);  // [d,dv]
  const Tensor s_vec = sum_rows(k_valid);      // [1,d]
  return div_col(matmul(q_norm, s_mat), matmul_nt(q_norm, s_vec),
                 kernels::kAttentionDenominatorFloor);
}

Tensor normalized_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const SeqMask& mask, Form form) {
  check_qkv(q, k, v);
  return attend_normalized(softmax_lastdim(q), softmax_lastdim(k), v, mask, form);
}

Tensor normalized_attention_direct(const Tensor& q, const Tensor& k, const Tensor& v,
                                   const SeqMask& mask) {
  return normalized_attention(q, k, v, mask, Form::Direct);
}

Tensor normalized_attention_factored(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const SeqMask& mask) {
  return normalized_attention(q, k, v, mask, Form::Factored);
}

Tensor attention_weights(const Tensor& q, const Tensor& k, const SeqMask& mask) {
  if (q.cols() != k.cols()) throw DimensionError("attention_weights: width mismatch");
  const SeqMask keys = resolve_mask(mask, k.rows());
  const Tensor k_norm = mask_rows(softmax_lastdim(k), keys.valid);
  const Tensor w = matmul_nt(softmax_lastdim(q), k_norm);
  return div_col(w, sum_cols(w), kernels::kAttentionDenominatorFloor);
}

std::vector<Tensor> split_heads(const Tensor& z, std::size_t heads) {
  if (heads == 0 || z.cols() % heads != 0)
    throw ConfigError("embedding width " + std::to_string(z.cols()) +
                      " is not divisible by head count " + std::to_string(heads));
  if (heads == 1) return {z};
  const std::size_t width = z.cols() / heads;
  std::vector<Tensor> parts;
  parts.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) parts.push_back(slice_cols(z, h * width, width));
  return parts;
}

Tensor merge_heads(const std::vector<Tensor>& parts) {
  if (parts.size() == 1) return parts.front();
  return concat_cols(parts);
}

Tensor multihead_normalized_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                      const SeqMask& mask, std::size_t heads, Form form) {
  check_qkv(q, k, v);
  const auto qs = split_heads(q, heads);
  const auto ks = split_heads(k, heads);
  const auto vs = split_heads(v, heads);
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h)
    outs.push_back(normalized_attention(qs[h], ks[h], vs[h], mask, form));
  return merge_heads(outs);
}

}  // namespace gnot::attention
