// SPDX-License-Identifier: Apache-2.0
#include "gnot/generators.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "gnot/errors.hpp"

namespace gnot {

namespace {

constexpr double kPi = std::numbers::pi;

Matrix uniform_points(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(n, 1);
  for (double& x : m.data) x = u(rng);
  return m;
}

}  // namespace

double antiderivative_input(std::span<const double> coeffs, double x) {
  double a = 0.0;
  for (std::size_t k = 1; k <= coeffs.size(); ++k) a += coeffs[k - 1] * std::sin(k * kPi * x);
  return a;
}

double antiderivative_target(std::span<const double> coeffs, double y) {
  double u = 0.0;
  for (std::size_t k = 1; k <= coeffs.size(); ++k)
    u += coeffs[k - 1] * (1.0 - std::cos(k * kPi * y)) / (k * kPi);
  return u;
}

double multiscale_target(double amplitude, double omega, double x) {
  return x < 0.5 ? std::sin(2.0 * kPi * x) : amplitude * std::sin(omega * 2.0 * kPi * x);
}

GeneratedData gen_antiderivative(std::size_t n_samples, std::size_t n_points, std::size_t k_max,
                                 std::uint64_t seed) {
  if (n_points < 2) throw ConfigError("points: n_points must be at least 2");
  if (k_max < 1) throw ConfigError("k_max: must be at least 1");
  GeneratedData out;
  out.dataset.header = {kDatasetFormatVersion, 1, 1, {{InputKind::DistributedFunction, 1}}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;

  for (std::size_t s = 0; s < n_samples; ++s) {
    std::vector<double> c(k_max);
    for (std::size_t k = 0; k < k_max; ++k) c[k] = coef(rng) / static_cast<double>(k + 1);

    DistributedFunction a{uniform_points(n_points, rng), Matrix(n_points, 1)};
    for (std::size_t i = 0; i < n_points; ++i) a.values.data[i] = antiderivative_input(c, a.points.data[i]);

    Sample sample;
    sample.query_points = uniform_points(n_points, rng);
    sample.targets = Matrix(n_points, 1);
    for (std::size_t i = 0; i < n_points; ++i) {
      const double y = sample.query_points.data[i];
      const double u = antiderivative_target(c, y);
      sample.targets.data[i] = u;
      const double q =
          Quad::integrate([&](double x) { return antiderivative_input(c, x); }, 0.0, y, 6, 1e-12);
      out.oracle_max_error = std::max(out.oracle_max_error, std::abs(u - q));
      ++out.oracle_checked;
    }
    sample.inputs.emplace_back(std::move(a));
    out.dataset.samples.push_back(std::move(sample));
  }
  return out;
}

GeneratedData gen_multiscale(std::size_t n_samples, std::size_t n_points, std::uint64_t seed) {
  if (n_points < 4) throw ConfigError("points: n_points must be at least 4");
  GeneratedData out;
  out.dataset.header = {kDatasetFormatVersion, 1, 1,
                        {{InputKind::ParamVector, 2}, {InputKind::BoundaryShape, 0}}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.05, 0.2), freq(16.0, 32.0);

  for (std::size_t s = 0; s < n_samples; ++s) {
    const double a = amp(rng);
    const double w = freq(rng);
    Sample sample;
    sample.query_points = uniform_points(n_points, rng);
    sample.targets = Matrix(n_points, 1);
    for (std::size_t i = 0; i < n_points; ++i) {
      const double x = sample.query_points.data[i];
      const double u = multiscale_target(a, w, x);
      sample.targets.data[i] = u;
      // Second evaluation path through the complex exponential.
      const double ref = x < 0.5 ? std::imag(std::exp(std::complex<double>(0.0, 2.0 * kPi * x)))
                                 : a * std::imag(std::exp(std::complex<double>(0.0, 2.0 * kPi * w * x)));
      out.oracle_max_error = std::max(out.oracle_max_error, std::abs(u - ref));
      ++out.oracle_checked;
    }
    sample.inputs.emplace_back(ParamVector{{a, w}});
    sample.inputs.emplace_back(BoundaryShape{Matrix(1, 1, 0.5)});
    out.dataset.samples.push_back(std::move(sample));
  }
  return out;
}

}  // namespace gnot
