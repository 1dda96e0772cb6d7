// SPDX-License-Identifier: Apache-2.0
#include "gnot/normalizer.hpp"

#include <cmath>

#include "gnot/errors.hpp"

namespace gnot {

Normalizer Normalizer::identity(std::size_t channels) {
  return Normalizer(std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0));
}

Normalizer::Normalizer(std::vector<double> mean, std::vector<double> stddev)
    : mean_(std::move(mean)), std_(std::move(stddev)) {
  if (mean_.size() != std_.size()) throw DimensionError("normalizer: mean/std length mismatch");
  for (double s : std_)
    if (!(s > 0.0)) throw ContractError("normalizer: std entries must be positive");
}

Normalizer Normalizer::fit(const Matrix& rows) {
  const Matrix* blocks[] = {&rows};
  return fit(blocks);
}

Normalizer Normalizer::fit(std::span<const Matrix* const> blocks) {
  if (blocks.empty()) throw ContractError("normalizer: nothing to fit");
  const std::size_t c = blocks.front()->cols;
  std::vector<double> sum(c, 0.0), var(c, 0.0);
  std::vector<double> first;
  std::vector<bool> constant(c, true);
  std::size_t count = 0;
  for (const Matrix* m : blocks) {
    if (m->cols != c) throw DimensionError("normalizer: inconsistent channel count");
    if (first.empty() && m->rows > 0) first.assign(m->row(0).begin(), m->row(0).end());
    for (std::size_t i = 0; i < m->rows; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const double x = (*m)(i, j);
        if (x != first[j]) constant[j] = false;
        sum[j] += x;
      }
    count += m->rows;
  }
  if (count == 0) throw ContractError("normalizer: no rows to fit");
  std::vector<double> mean(c);
  for (std::size_t j = 0; j < c; ++j)
    mean[j] = constant[j] ? first[j] : sum[j] / static_cast<double>(count);
  for (const Matrix* m : blocks)
    for (std::size_t i = 0; i < m->rows; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const double dx = (*m)(i, j) - mean[j];
        var[j] += dx * dx;
      }
  Normalizer out;
  out.mean_ = std::move(mean);
  out.std_.resize(c);
  for (std::size_t j = 0; j < c; ++j) {
    const double s = std::sqrt(var[j] / static_cast<double>(count));
    if (s < kStdFloor) {
      out.std_[j] = kStdFloor;
      out.warnings_.push_back("channel " + std::to_string(j) +
                              " has zero variance; std floored to 1e-8");
    } else {
      out.std_[j] = s;
    }
  }
  return out;
}

Matrix Normalizer::apply(const Matrix& x) const {
  if (x.cols != channels()) throw DimensionError("normalizer: width mismatch in apply");
  Matrix y = x;
  for (std::size_t i = 0; i < y.rows; ++i)
    for (std::size_t j = 0; j < y.cols; ++j) y(i, j) = (y(i, j) - mean_[j]) / std_[j];
  return y;
}

Matrix Normalizer::invert(const Matrix& x) const {
  if (x.cols != channels()) throw DimensionError("normalizer: width mismatch in invert");
  Matrix y = x;
  for (std::size_t i = 0; i < y.rows; ++i)
    for (std::size_t j = 0; j < y.cols; ++j) y(i, j) = y(i, j) * std_[j] + mean_[j];
  return y;
}

}  // namespace gnot
