// SPDX-License-Identifier: Apache-2.0
//
// Synthetic operator-learning tasks with analytic ground truth.
//
// antiderivative (d=1, one distributed slot):
//   a(x) = sum_{k=1..K} c_k sin(k pi x),  c_k ~ U[-1,1]/k
//   u(y) = int_0^y a = sum_k c_k (1 - cos(k pi y)) / (k pi)
// multiscale (d=1, parameter slot (A, w) and boundary slot {0.5}):
//   u(x) = sin(2 pi x)            on [0, 0.5)
//   u(x) = A sin(w 2 pi x)        on [0.5, 1],  A ~ U[0.05,0.2], w ~ U[16,32]
// The two pieces are not matched at x = 0.5; the jump is intentional.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gnot/data.hpp"

namespace gnot {

struct GeneratedData {
  Dataset dataset;
  /// Largest |target - oracle| over every checked target value.
  double oracle_max_error = 0.0;
  std::size_t oracle_checked = 0;
};

inline constexpr double kGeneratorOracleTolerance = 1e-10;

double antiderivative_input(std::span<const double> coeffs, double x);
double antiderivative_target(std::span<const double> coeffs, double y);
double multiscale_target(double amplitude, double omega, double x);

/// Throws ConfigError if n_points < 2 or k_max < 1.
GeneratedData gen_antiderivative(std::size_t n_samples, std::size_t n_points, std::size_t k_max,
                                 std::uint64_t seed);
/// Throws ConfigError if n_points < 4.
GeneratedData gen_multiscale(std::size_t n_samples, std::size_t n_points, std::uint64_t seed);

}  // namespace gnot
