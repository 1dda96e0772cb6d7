// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gnot/matrix.hpp"

namespace gnot {

/// Per-channel standardization fitted on training data only.
class Normalizer {
 public:
  static constexpr double kStdFloor = 1e-8;

  Normalizer() = default;
  /// Identity map over `channels` columns.
  static Normalizer identity(std::size_t channels);
  Normalizer(std::vector<double> mean, std::vector<double> stddev);

  /// Fits over the rows of every matrix; all must share one width. Channels
  /// with (near) zero variance get the floored std and produce a warning.
  static Normalizer fit(std::span<const Matrix* const> blocks);
  static Normalizer fit(const Matrix& rows);

  Matrix apply(const Matrix& x) const;
  Matrix invert(const Matrix& x) const;

  std::size_t channels() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return std_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  friend bool operator==(const Normalizer& a, const Normalizer& b) {
    return a.mean_ == b.mean_ && a.std_ == b.std_;
  }

 private:
  std::vector<double> mean_;
  std::vector<double> std_;
  std::vector<std::string> warnings_;
};

}  // namespace gnot
