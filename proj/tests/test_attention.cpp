// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "gnot/attention.hpp"
#include "gnot/errors.hpp"
#include "support.hpp"

using namespace gnot;
using namespace gnot::attention;
using testing::Gen;

namespace {

Matrix softmax_oracle_ref(const Matrix& q, const Matrix& k, const Matrix& v, double tau) {
  Matrix out(q.rows, v.cols);
  for (std::size_t t = 0; t < q.rows; ++t) {
    std::vector<double> logits(k.rows);
    for (std::size_t i = 0; i < k.rows; ++i) {
      double s = 0.0;
      for (std::size_t a = 0; a < q.cols; ++a) s += q(t, a) * k(i, a);
      logits[i] = s / tau;
    }
    const auto w = testing::softmax_ref(logits);
    for (std::size_t i = 0; i < k.rows; ++i)
      for (std::size_t j = 0; j < v.cols; ++j) out(t, j) += w[i] * v(i, j);
  }
  return out;
}

Matrix keep_rows(const Matrix& m, const std::vector<std::uint8_t>& mask) {
  Matrix out(0, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    if (mask[i]) {
      out.data.insert(out.data.end(), m.row(i).begin(), m.row(i).end());
      ++out.rows;
    }
  return out;
}

Matrix cols(const Matrix& m, std::size_t start, std::size_t width) {
  Matrix out(m.rows, width);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < width; ++j) out(i, j) = m(i, start + j);
  return out;
}

std::vector<std::uint8_t> random_mask(Gen& g, std::size_t m) {
  std::vector<std::uint8_t> mask(m);
  for (auto& b : mask) b = g.uniform(0, 1) < 0.7;
  mask[g.index(0, m - 1)] = 1;
  return mask;
}

const Form kForms[] = {Form::Direct, Form::Factored};

}  // namespace

TEST_CASE("softmax oracle") {
  Gen g(10);
  const Matrix v = g.matrix(1, 3);
  auto z = softmax_attention_oracle(g.constant(4, 3), g.constant(1, 3), Tensor::constant(v), {1.0});
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t j = 0; j < 3; ++j) CHECK(z.at(t, j) == v(0, j));

  const Matrix vv = g.matrix(5, 2);
  auto zm = softmax_attention_oracle(g.constant(3, 2), g.constant(5, 2), Tensor::constant(vv), {1e6});
  for (std::size_t j = 0; j < 2; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 5; ++i) mean += vv(i, j) / 5;
    for (std::size_t t = 0; t < 3; ++t) CHECK(std::abs(zm.at(t, j) - mean) <= 1e-4);
  }

  const Matrix q = g.matrix(3, 2), k = g.matrix(4, 2), v2 = g.matrix(4, 2);
  auto r = softmax_attention_oracle(Tensor::constant(q), Tensor::constant(k), Tensor::constant(v2),
                                    OracleConfig::for_width(2));
  CHECK(testing::max_abs_diff(r.values(), softmax_oracle_ref(q, k, v2, std::sqrt(2.0)).data) <= 1e-12);

  CHECK_THROWS_AS(softmax_attention_oracle(g.constant(2, 2), g.constant(2, 2), g.constant(2, 2), {0.0}),
                  ConfigError);
  CHECK(OracleConfig::for_width(16).tau == 4.0);
}

TEST_CASE("single key and constant values") {
  Gen g(11);
  for (Form form : kForms) {
    const Matrix v = g.matrix(1, 4);
    auto z = normalized_attention(g.constant(6, 4), g.constant(1, 4), Tensor::constant(v),
                                  SeqMask::all(1), form);
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t j = 0; j < 4; ++j) {
        CHECK(std::abs(z.at(t, j) - v(0, j)) <= 1e-15);
        if (form == Form::Direct) CHECK(z.at(t, j) == v(0, j));
      }

    Matrix c(9, 3);
    for (std::size_t i = 0; i < 9; ++i) c.row(i)[0] = 1.5, c.row(i)[1] = -2.0, c.row(i)[2] = 0.25;
    auto zc = normalized_attention(g.constant(5, 3), g.constant(9, 3), Tensor::constant(c),
                                   SeqMask::all(9), form);
    for (std::size_t t = 0; t < 5; ++t) {
      CHECK(std::abs(zc.at(t, 0) - 1.5) <= 1e-14);
      CHECK(std::abs(zc.at(t, 1) + 2.0) <= 1e-14);
      CHECK(std::abs(zc.at(t, 2) - 0.25) <= 1e-14);
    }
  }
}

TEST_CASE("direct form matches the double-sum reference") {
  Gen g(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = g.index(1, 20), m = g.index(1, 20), d = g.index(1, 8);
    const Matrix q = g.matrix(n, d), k = g.matrix(m, d), v = g.matrix(m, d);
    const auto mask = random_mask(g, m);
    auto z = normalized_attention_direct(Tensor::constant(q), Tensor::constant(k), Tensor::constant(v),
                                         {mask});
    CHECK(testing::max_rel_diff(z.values(), testing::normalized_attention_ref(q, k, v, mask).data) <=
          1e-12);
  }
}

TEST_CASE("factored equals direct on random instances") {
  Gen g(13);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = g.index(1, 64), m = g.index(1, 64), d = g.index(1, 16);
    const Matrix q = g.matrix(n, d, -4, 4), k = g.matrix(m, d, -4, 4), v = g.matrix(m, d);
    const SeqMask mask{random_mask(g, m)};
    const auto ref = testing::normalized_attention_ref(q, k, v, mask.valid);
    auto zf = normalized_attention_factored(Tensor::constant(q), Tensor::constant(k),
                                            Tensor::constant(v), mask);
    worst = std::max(worst, testing::max_rel_diff(zf.values(), ref.data));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("attention weights lie on the simplex") {
  Gen g(14);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = g.index(1, 10), m = g.index(1, 30), d = g.index(1, 8);
    const auto mask = random_mask(g, m);
    auto w = attention_weights(g.constant(n, d, -10, 10), g.constant(m, d, -10, 10), {mask});
    for (std::size_t t = 0; t < n; ++t) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (mask[i]) CHECK(w.at(t, i) > 0.0);
        else CHECK(w.at(t, i) == 0.0);
        s += w.at(t, i);
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("outputs lie in the convex hull of the value rows") {
  Gen g(15);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = g.index(1, 12), m = g.index(1, 12), d = g.index(1, 6);
    const Matrix v = g.matrix(m, d);
    for (Form form : kForms) {
      auto z = normalized_attention(g.constant(n, d), g.constant(m, d), Tensor::constant(v),
                                    SeqMask::all(m), form);
      for (std::size_t j = 0; j < d; ++j) {
        double lo = v(0, j), hi = v(0, j);
        for (std::size_t i = 1; i < m; ++i) lo = std::min(lo, v(i, j)), hi = std::max(hi, v(i, j));
        for (std::size_t t = 0; t < n; ++t) {
          CHECK(z.at(t, j) >= lo - 1e-12);
          CHECK(z.at(t, j) <= hi + 1e-12);
        }
      }
    }
  }
}

TEST_CASE("key permutation invariance and query equivariance") {
  Gen g(16);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = g.index(1, 16), m = g.index(1, 16), d = g.index(1, 8);
    const Matrix q = g.matrix(n, d), k = g.matrix(m, d), v = g.matrix(m, d);
    const auto mask = random_mask(g, m);
    const auto pk = g.permutation(m), pq = g.permutation(n);
    std::vector<std::uint8_t> pmask(m);
    for (std::size_t i = 0; i < m; ++i) pmask[i] = mask[pk[i]];
    for (Form form : kForms) {
      const auto base = normalized_attention(Tensor::constant(q), Tensor::constant(k),
                                             Tensor::constant(v), {mask}, form)
                            .to_matrix();
      const auto kp = normalized_attention(Tensor::constant(q),
                                           Tensor::constant(testing::permute_rows(k, pk)),
                                           Tensor::constant(testing::permute_rows(v, pk)), {pmask}, form);
      CHECK(testing::max_rel_diff(kp.values(), base.data) <= 1e-12);
      const auto qp = normalized_attention(Tensor::constant(testing::permute_rows(q, pq)),
                                           Tensor::constant(k), Tensor::constant(v), {mask}, form);
      CHECK(testing::max_abs_diff(qp.values(), testing::permute_rows(base, pq).data) == 0.0);
    }
  }
}

TEST_CASE("masked keys behave as if deleted") {
  Gen g(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = g.index(1, 10), m = g.index(2, 20), d = g.index(1, 6);
    const Matrix q = g.matrix(n, d), k = g.matrix(m, d), v = g.matrix(m, d);
    auto mask = random_mask(g, m);
    const Matrix kt = keep_rows(k, mask), vt = keep_rows(v, mask);
    for (Form form : kForms) {
      auto masked = normalized_attention(Tensor::constant(q), Tensor::constant(k), Tensor::constant(v),
                                         {mask}, form);
      auto truncated = normalized_attention(Tensor::constant(q), Tensor::constant(kt),
                                            Tensor::constant(vt), SeqMask::all(kt.rows), form);
      CHECK(testing::max_rel_diff(masked.values(), truncated.values()) <= 1e-12);
    }
  }
}

TEST_CASE("attention contract errors") {
  Gen g(18);
  for (Form form : kForms) {
    CHECK_THROWS_AS(normalized_attention(g.constant(2, 3), g.constant(4, 3), g.constant(4, 3),
                                         {std::vector<std::uint8_t>(4, 0)}, form),
                    ContractError);
    CHECK_THROWS_AS(normalized_attention(g.constant(2, 3), g.constant(4, 2), g.constant(4, 3),
                                         SeqMask::all(4), form),
                    DimensionError);
    CHECK_THROWS_AS(normalized_attention(g.constant(2, 3), g.constant(4, 3), g.constant(5, 3),
                                         SeqMask::all(4), form),
                    DimensionError);
    CHECK_THROWS_AS(normalized_attention(g.constant(2, 3), g.constant(4, 3), g.constant(4, 3),
                                         SeqMask::all(3), form),
                    DimensionError);
  }
}

TEST_CASE("head split and merge") {
  Gen g(19);
  const Tensor z = g.constant(5, 12);
  auto one = split_heads(z, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].to_matrix() == z.to_matrix());
  for (std::size_t h : {1, 2, 3, 4, 6, 12}) {
    auto parts = split_heads(z, h);
    CHECK(parts.size() == h);
    CHECK(parts[0].cols() == 12 / h);
    CHECK(merge_heads(parts).to_matrix() == z.to_matrix());
  }
  CHECK_THROWS_AS(split_heads(z, 5), ConfigError);
}

TEST_CASE("multihead attention equals independent heads concatenated") {
  Gen g(20);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = g.index(1, 12), m = g.index(1, 12), d = 16, heads = 4, w = d / heads;
    const Matrix q = g.matrix(n, d), k = g.matrix(m, d), v = g.matrix(m, d);
    const auto mask = random_mask(g, m);
    Matrix expected(n, d);
    for (std::size_t h = 0; h < heads; ++h) {
      const auto head = testing::normalized_attention_ref(cols(q, h * w, w), cols(k, h * w, w),
                                                          cols(v, h * w, w), mask);
      for (std::size_t t = 0; t < n; ++t)
        for (std::size_t j = 0; j < w; ++j) expected(t, h * w + j) = head(t, j);
    }
    for (Form form : kForms) {
      auto z = multihead_normalized_attention(Tensor::constant(q), Tensor::constant(k),
                                              Tensor::constant(v), {mask}, heads, form);
      CHECK(testing::max_abs_diff(z.values(), expected.data) <= 1e-12);
    }
  }
}

TEST_CASE("attention gradients match central differences") {
  Gen g(21);
  for (Form form : kForms) {
    auto q = g.param(3, 4), k = g.param(5, 4), v = g.param(5, 4);
    const SeqMask mask{{1, 0, 1, 1, 1}};
    auto rep = testing::check_gradients(
        [&] { return testing::probe(multihead_normalized_attention(q, k, v, mask, 2, form)); }, {q, k, v});
    INFO("worst " << rep.worst);
    CHECK(rep.pass);
  }
}
