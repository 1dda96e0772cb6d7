// SPDX-License-Identifier: Apache-2.0
#include "gnot/encoding.hpp"

#include "gnot/errors.hpp"

namespace gnot {

namespace {

Tensor lift(const Matrix& rows, const Mlp& mlp, ParamView params, const Normalizer* norm,
            const char* what) {
  if (rows.cols != mlp.in())
    throw ConfigError(std::string(what) + ": feature width " + std::to_string(rows.cols) +
                      " does not match encoder input width " + std::to_string(mlp.in()));
  const Matrix& x = norm ? norm->apply(rows) : rows;
  return mlp.forward(params, Tensor::constant(x));
}

}  // namespace

Tensor encode_queries(const Matrix& points, const Mlp& mlp, ParamView params,
                      const Normalizer* norm) {
  if (points.rows == 0) throw ContractError("encode_queries: no query points");
  return lift(points, mlp, params, norm, "encode_queries");
}

ConditionalEmbedding encode_rows(const Matrix& rows, attention::SeqMask mask, const Mlp& mlp,
                                 ParamView params, const Normalizer* norm) {
  if (rows.rows == 0) throw ContractError("encode_input: empty input sequence");
  if (mask.valid.empty()) mask = attention::SeqMask::all(rows.rows);
  if (mask.size() != rows.rows) throw DimensionError("encode_input: mask/row count mismatch");
  return {lift(rows, mlp, params, norm, "encode_input"), std::move(mask)};
}

ConditionalEmbedding encode_input(const InputFunction& input, const Mlp& mlp, ParamView params,
                                  const Normalizer* norm) {
  if (token_count(input) == 0) throw ContractError("encode_input: empty input sequence");
  if (const auto* pv = std::get_if<ParamVector>(&input); pv && pv->values.empty())
    throw ContractError("encode_input: empty parameter vector");
  return encode_rows(feature_rows(input), {}, mlp, params, norm);
}

}  // namespace gnot
