// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "gnot/encoding.hpp"
#include "gnot/errors.hpp"
#include "support.hpp"

using namespace gnot;
using testing::Gen;

namespace {

struct Encoder {
  ParamStore store;
  Mlp mlp;
  Encoder(const std::string& name, std::vector<std::size_t> widths, std::uint64_t seed) {
    Rng rng(seed);
    mlp = Mlp::create(store, name, widths, rng);
  }
  std::vector<Tensor> params() const { return store.bind(false); }
};

}  // namespace

TEST_CASE("zero weights give a zero embedding") {
  Encoder enc("q", {2, 8, 8}, 1);
  for (std::size_t i = 0; i < enc.store.size(); ++i)
    std::fill(enc.store[i].values.begin(), enc.store[i].values.end(), 0.0);
  Gen g(1);
  auto x = encode_queries(g.matrix(5, 2), enc.mlp, enc.params());
  for (double v : x.values()) CHECK(v == 0.0);
}

TEST_CASE("single linear layer matches a hand product") {
  ParamStore store;
  Rng rng(0);
  Mlp mlp = Mlp::create(store, "q", {2, 3}, rng);
  store[0].values = {1.0, 2.0, 3.0, -1.0, 0.5, 4.0};  // W [2,3]
  store[1].values = {0.1, 0.2, 0.3};
  auto x = encode_queries(Matrix(1, 2, std::vector<double>{0.5, 0.25}), mlp, store.bind(false));
  // 0.5*[1,2,3] + 0.25*[-1,0.5,4] + b
  CHECK(x.at(0, 0) == doctest::Approx(0.5 - 0.25 + 0.1).epsilon(1e-15));
  CHECK(x.at(0, 1) == doctest::Approx(1.0 + 0.125 + 0.2).epsilon(1e-15));
  CHECK(x.at(0, 2) == doctest::Approx(1.5 + 1.0 + 0.3).epsilon(1e-15));
}

TEST_CASE("query encoding is pointwise") {
  Encoder enc("q", {3, 16, 16, 16}, 2);
  Gen g(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = g.index(1, 30);
    const Matrix pts = g.matrix(n, 3);
    const auto base = encode_queries(pts, enc.mlp, enc.params()).to_matrix();
    const auto perm = g.permutation(n);
    const auto permuted = encode_queries(testing::permute_rows(pts, perm), enc.mlp, enc.params());
    CHECK(permuted.to_matrix() == testing::permute_rows(base, perm));

    Matrix changed = pts;
    const std::size_t row = g.index(0, n - 1);
    changed(row, 0) += 0.7;
    const auto y = encode_queries(changed, enc.mlp, enc.params()).to_matrix();
    for (std::size_t i = 0; i < n; ++i) {
      const bool same = std::equal(y.row(i).begin(), y.row(i).end(), base.row(i).begin());
      CHECK(same == (i != row));
    }
  }
}

TEST_CASE("width mismatch is a configuration error") {
  Encoder enc("q", {2, 8}, 3);
  Gen g(3);
  CHECK_THROWS_AS(encode_queries(g.matrix(4, 3), enc.mlp, enc.params()), ConfigError);
  CHECK_THROWS_AS(encode_queries(Matrix(0, 2), enc.mlp, enc.params()), ContractError);
}

TEST_CASE("embedding shapes per input kind") {
  Gen g(4);
  const std::size_t ne = 8, d = 2;

  Encoder pv("p", {3, ne}, 1);
  auto y = encode_input(ParamVector{{1.0, 2.0, 3.0}}, pv.mlp, pv.params());
  CHECK(y.y.rows() == 1);
  CHECK(y.y.cols() == ne);
  CHECK(y.mask.size() == 1);

  Encoder df("f", {d + 1, ne}, 2);
  auto yd = encode_input(DistributedFunction{g.matrix(7, d), g.matrix(7, 1)}, df.mlp, df.params());
  CHECK(yd.y.rows() == 7);
  CHECK(yd.mask.all_valid());

  Encoder bd("b", {d, ne}, 3);
  CHECK(encode_input(BoundaryShape{g.matrix(5, d)}, bd.mlp, bd.params()).y.rows() == 5);

  Encoder ex("x", {d + 2, ne}, 4);
  CHECK(encode_input(ExtraFeatures{g.matrix(4, d), g.matrix(4, 2)}, ex.mlp, ex.params()).y.rows() == 4);

  Encoder ed("e", {2 * d + 1, ne}, 5);
  CHECK(encode_input(Edges{g.matrix(6, d), g.matrix(6, d), g.matrix(6, 1)}, ed.mlp, ed.params()).y.rows() ==
        6);

  CHECK_THROWS_AS(encode_input(BoundaryShape{Matrix(0, d)}, bd.mlp, bd.params()), ContractError);
  CHECK_THROWS_AS(encode_input(ParamVector{{}}, pv.mlp, pv.params()), ContractError);
}

TEST_CASE("feature rows concatenate each token's parts") {
  const Matrix src(2, 2, std::vector<double>{1, 2, 3, 4});
  const Matrix dst(2, 2, std::vector<double>{5, 6, 7, 8});
  const Matrix feat(2, 1, std::vector<double>{9, 10});
  const auto rows = feature_rows(Edges{src, dst, feat});
  CHECK(rows == Matrix(2, 5, std::vector<double>{1, 2, 5, 6, 9, 3, 4, 7, 8, 10}));

  const auto pv = feature_rows(ParamVector{{0.5, 1.5}});
  CHECK(pv == Matrix(1, 2, std::vector<double>{0.5, 1.5}));

  const auto df = feature_rows(DistributedFunction{src, feat});
  CHECK(df == Matrix(2, 3, std::vector<double>{1, 2, 9, 3, 4, 10}));

  CHECK(feature_width({InputKind::Edges, 3}, 2) == 7);
  CHECK(feature_width({InputKind::BoundaryShape, 0}, 3) == 3);
  CHECK(feature_width({InputKind::ParamVector, 4}, 3) == 4);
}

TEST_CASE("slots with distinct encoders differ on identical inputs") {
  Gen g(5);
  const DistributedFunction f{g.matrix(6, 1), g.matrix(6, 1)};
  ParamStore store;
  Rng rng(9);
  const Mlp a = Mlp::create(store, "slot0", {2, 8, 8}, rng);
  const Mlp b = Mlp::create(store, "slot1", {2, 8, 8}, rng);
  const auto p = store.bind(false);
  const auto ya = encode_input(f, a, p).y.to_matrix();
  const auto yb = encode_input(f, b, p).y.to_matrix();
  CHECK(testing::max_abs_diff(ya.data, yb.data) > 1e-3);
  for (const auto& l : a.layers)
    for (const auto& m : b.layers) CHECK(l.weight != m.weight);
}

TEST_CASE("input validation names the violated field") {
  const SlotSpec slot{InputKind::DistributedFunction, 1};
  Gen g(6);
  CHECK_NOTHROW(validate_input(DistributedFunction{g.matrix(3, 2), g.matrix(3, 1)}, slot, 2));
  try {
    validate_input(DistributedFunction{g.matrix(3, 2), g.matrix(4, 1)}, slot, 2);
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("values") != std::string::npos);
  }
  CHECK_THROWS_AS(validate_input(DistributedFunction{g.matrix(3, 3), g.matrix(3, 1)}, slot, 2),
                  ContractError);
  CHECK_THROWS_AS(validate_input(BoundaryShape{g.matrix(3, 2)}, slot, 2), ContractError);
  CHECK_THROWS_AS(validate_input(ParamVector{{}}, {InputKind::ParamVector, 0}, 2), ContractError);
}

TEST_CASE("kind names round trip") {
  for (auto k : {InputKind::ParamVector, InputKind::BoundaryShape, InputKind::DistributedFunction,
                 InputKind::ExtraFeatures, InputKind::Edges})
    CHECK(parse_kind(kind_name(k)) == k);
  CHECK_THROWS_AS(parse_kind("mesh"), ConfigError);
}

TEST_CASE("normalizer standardizes and inverts") {
  Gen g(7);
  const Matrix x = g.matrix(50, 3, -5, 9);
  const auto n = Normalizer::fit(x);
  const auto z = n.apply(x);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < 50; ++i) mean += z(i, j) / 50;
    for (std::size_t i = 0; i < 50; ++i) sq += (z(i, j) - mean) * (z(i, j) - mean) / 50;
    CHECK(std::abs(mean) <= 1e-12);
    CHECK(std::abs(sq - 1.0) <= 1e-12);
  }
  CHECK(testing::max_abs_diff(n.invert(z).data, x.data) <= 1e-12);
  CHECK(n.warnings().empty());
}

TEST_CASE("constant channels get the floored std and a warning") {
  Matrix x(10, 2);
  for (std::size_t i = 0; i < 10; ++i) x(i, 0) = 3.0, x(i, 1) = static_cast<double>(i);
  const auto n = Normalizer::fit(x);
  CHECK(n.stddev()[0] == Normalizer::kStdFloor);
  CHECK(n.warnings().size() == 1);
  for (double v : n.apply(x).data) CHECK(std::isfinite(v));
  CHECK_THROWS_AS(Normalizer({0.0}, {0.0}), ContractError);
  CHECK_THROWS_AS(n.apply(Matrix(2, 3)), DimensionError);
}

TEST_CASE("normalizer fit pools several blocks") {
  Gen g(8);
  const Matrix a = g.matrix(7, 2), b = g.matrix(11, 2);
  Matrix both = a;
  both.data.insert(both.data.end(), b.data.begin(), b.data.end());
  both.rows += b.rows;
  const Matrix* blocks[] = {&a, &b};
  const auto pooled = Normalizer::fit(std::span<const Matrix* const>(blocks));
  const auto joint = Normalizer::fit(both);
  CHECK(testing::max_abs_diff(pooled.mean(), joint.mean()) <= 1e-14);
  CHECK(testing::max_abs_diff(pooled.stddev(), joint.stddev()) <= 1e-14);
}
