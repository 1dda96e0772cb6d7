// SPDX-License-Identifier: Apache-2.0
//
// Heterogeneous input functions of an operator-learning sample and the flat
// feature rows each one contributes to its encoder.
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gnot/matrix.hpp"

namespace gnot {

/// Global parameters theta; encoded as a single token.
struct ParamVector {
  std::vector<double> values;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

/// Boundary points x_i; encoded from coordinates alone.
struct BoundaryShape {
  Matrix points;  // [N, d]

  friend bool operator==(const BoundaryShape&, const BoundaryShape&) = default;
};

/// Function sampled on a mesh: (x_i, a(x_i)).
struct DistributedFunction {
  Matrix points;  // [N, d]
  Matrix values;  // [N, c]

  friend bool operator==(const DistributedFunction&, const DistributedFunction&) = default;
};

/// Extra per-node features (x_i, z_i), e.g. a subdomain indicator.
struct ExtraFeatures {
  Matrix points;    // [N, d]
  Matrix features;  // [N, z]

  friend bool operator==(const ExtraFeatures&, const ExtraFeatures&) = default;
};

/// Mesh edges (x_src, x_dst, e).
struct Edges {
  Matrix src;       // [E, d]
  Matrix dst;       // [E, d]
  Matrix features;  // [E, e]

  friend bool operator==(const Edges&, const Edges&) = default;
};

using InputFunction =
    std::variant<ParamVector, BoundaryShape, DistributedFunction, ExtraFeatures, Edges>;

enum class InputKind { ParamVector, BoundaryShape, DistributedFunction, ExtraFeatures, Edges };

InputKind kind_of(const InputFunction& input);
std::string_view kind_name(InputKind kind);
/// Accepts the names produced by kind_name ("param", "boundary", ...).
InputKind parse_kind(std::string_view name);

/// Layout of one input slot shared by every sample of a dataset. `channels`
/// is p for parameter vectors, c/z/e for the others and 0 for boundaries.
struct SlotSpec {
  InputKind kind = InputKind::DistributedFunction;
  std::size_t channels = 0;

  friend bool operator==(const SlotSpec&, const SlotSpec&) = default;
};

/// Width of one feature row of this slot for spatial dimension `dim`.
std::size_t feature_width(const SlotSpec& slot, std::size_t dim);
/// Number of tokens the input contributes (1 for parameter vectors).
std::size_t token_count(const InputFunction& input);
/// Rows entering the slot encoder: the concatenation of each token's parts.
Matrix feature_rows(const InputFunction& input);

/// Throws ContractError describing the first violated constraint.
void validate_input(const InputFunction& input, const SlotSpec& slot, std::size_t dim);

}  // namespace gnot
