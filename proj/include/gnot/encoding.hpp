// SPDX-License-Identifier: Apache-2.0
//
// Input encoding: every input slot owns an MLP that lifts its feature rows to
// the embedding width, and a separate MLP lifts query coordinates. All maps
// are pointwise, so row i of an embedding depends only on token i.
#pragma once

#include "gnot/attention.hpp"
#include "gnot/inputs.hpp"
#include "gnot/matrix.hpp"
#include "gnot/nn.hpp"
#include "gnot/normalizer.hpp"

namespace gnot {

/// Encoded input function Y_l with the validity of each token.
struct ConditionalEmbedding {
  Tensor y;  // [N_l, n_e]
  attention::SeqMask mask;
};

/// Query embedding X = f(points). Throws ConfigError on a width mismatch.
Tensor encode_queries(const Matrix& points, const Mlp& mlp, ParamView params,
                      const Normalizer* norm = nullptr);

ConditionalEmbedding encode_input(const InputFunction& input, const Mlp& mlp, ParamView params,
                                  const Normalizer* norm = nullptr);

/// Encodes already-flattened (possibly padded) feature rows.
ConditionalEmbedding encode_rows(const Matrix& rows, attention::SeqMask mask, const Mlp& mlp,
                                 ParamView params, const Normalizer* norm = nullptr);

}  // namespace gnot
