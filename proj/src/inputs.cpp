// SPDX-License-Identifier: Apache-2.0
#include "gnot/inputs.hpp"

#include <algorithm>
#include <initializer_list>

#include "gnot/errors.hpp"

namespace gnot {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Matrix hconcat(std::initializer_list<const Matrix*> parts) {
  const std::size_t rows = (*parts.begin())->rows;
  std::size_t cols = 0;
  for (const Matrix* m : parts) cols += m->cols;
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double* dst = out.row(i).data();
    for (const Matrix* m : parts) {
      auto r = m->row(i);
      dst = std::copy(r.begin(), r.end(), dst);
    }
  }
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

void require_points(const Matrix& m, const char* field, std::size_t rows, std::size_t cols) {
  require(m.rows == rows, std::string(field) + ": expected " + std::to_string(rows) +
                              " rows, got " + std::to_string(m.rows));
  require(m.cols == cols, std::string(field) + ": expected width " + std::to_string(cols) +
                              ", got " + std::to_string(m.cols));
}

}  // namespace

InputKind kind_of(const InputFunction& input) { return static_cast<InputKind>(input.index()); }

std::string_view kind_name(InputKind kind) {
  switch (kind) {
    case InputKind::ParamVector: return "param";
    case InputKind::BoundaryShape: return "boundary";
    case InputKind::DistributedFunction: return "distributed";
    case InputKind::ExtraFeatures: return "extra";
    case InputKind::Edges: return "edges";
  }
  return "unknown";
}

InputKind parse_kind(std::string_view name) {
  for (auto k : {InputKind::ParamVector, InputKind::BoundaryShape, InputKind::DistributedFunction,
                 InputKind::ExtraFeatures, InputKind::Edges})
    if (kind_name(k) == name) return k;
  throw ConfigError("unknown input kind '" + std::string(name) + "'");
}

std::size_t feature_width(const SlotSpec& slot, std::size_t dim) {
  switch (slot.kind) {
    case InputKind::ParamVector: return slot.channels;
    case InputKind::BoundaryShape: return dim;
    case InputKind::DistributedFunction:
    case InputKind::ExtraFeatures: return dim + slot.channels;
    case InputKind::Edges: return 2 * dim + slot.channels;
  }
  return 0;
}

std::size_t token_count(const InputFunction& input) {
  return std::visit(Overloaded{
                        [](const ParamVector&) -> std::size_t { return 1; },
                        [](const BoundaryShape& b) { return b.points.rows; },
                        [](const DistributedFunction& f) { return f.points.rows; },
                        [](const ExtraFeatures& f) { return f.points.rows; },
                        [](const Edges& e) { return e.src.rows; },
                    },
                    input);
}

Matrix feature_rows(const InputFunction& input) {
  return std::visit(
      Overloaded{
          [](const ParamVector& p) { return Matrix(1, p.values.size(), p.values); },
          [](const BoundaryShape& b) { return b.points; },
          [](const DistributedFunction& f) { return hconcat({&f.points, &f.values}); },
          [](const ExtraFeatures& f) { return hconcat({&f.points, &f.features}); },
          [](const Edges& e) { return hconcat({&e.src, &e.dst, &e.features}); },
      },
      input);
}

void validate_input(const InputFunction& input, const SlotSpec& slot, std::size_t dim) {
  require(kind_of(input) == slot.kind, "input kind '" + std::string(kind_name(kind_of(input))) +
                                           "' does not match slot kind '" +
                                           std::string(kind_name(slot.kind)) + "'");
  std::visit(Overloaded{
                 [&](const ParamVector& p) {
                   require(!p.values.empty(), "param: empty parameter vector");
                   require(p.values.size() == slot.channels,
                           "param: expected " + std::to_string(slot.channels) + " values, got " +
                               std::to_string(p.values.size()));
                 },
                 [&](const BoundaryShape& b) {
                   require(b.points.rows >= 1, "boundary: empty point sequence");
                   require_points(b.points, "boundary.points", b.points.rows, dim);
                 },
                 [&](const DistributedFunction& f) {
                   require(f.points.rows >= 1, "distributed: empty point sequence");
                   require_points(f.points, "distributed.points", f.points.rows, dim);
                   require_points(f.values, "distributed.values", f.points.rows, slot.channels);
                 },
                 [&](const ExtraFeatures& f) {
                   require(f.points.rows >= 1, "extra: empty point sequence");
                   require_points(f.points, "extra.points", f.points.rows, dim);
                   require_points(f.features, "extra.features", f.points.rows, slot.channels);
                 },
                 [&](const Edges& e) {
                   require(e.src.rows >= 1, "edges: empty edge sequence");
                   require_points(e.src, "edges.src", e.src.rows, dim);
                   require_points(e.dst, "edges.dst", e.src.rows, dim);
                   require_points(e.features, "edges.feat", e.src.rows, slot.channels);
                 },
             },
             input);
}

}  // namespace gnot
