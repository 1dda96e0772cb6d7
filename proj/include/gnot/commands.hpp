// SPDX-License-Identifier: Apache-2.0
//
// Command implementations behind the `gnot` executable. Each returns the
// process exit code; argument parsing lives in tools/gnot_cli.cpp.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gnot {

struct GenDataOptions {
  std::string task;  // antiderivative | multiscale
  std::filesystem::path out;
  std::size_t n = 1000;
  std::size_t points = 128;
  std::size_t k_max = 5;
  std::uint64_t seed = 0;
};
int cmd_gen_data(const GenDataOptions& opt, std::ostream& out, std::ostream& err);

struct TrainCommandOptions {
  std::optional<std::filesystem::path> config;
  std::vector<std::string> overrides;  // section.key=value, applied after the file
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> resume;
  std::optional<std::size_t> stop_at_epoch;
  bool quiet = false;
};
int cmd_train(const TrainCommandOptions& opt, std::ostream& out, std::ostream& err);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> per_sample_csv;
  std::optional<std::filesystem::path> save_predictions;
  unsigned threads = 0;
};
int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err);

struct BenchOptions {
  std::size_t min_m = 256;
  std::size_t max_m = 8192;
  std::size_t n = 0;  // query count; 0 = N equal to M
  std::size_t d = 64;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out;
};

struct BenchRow {
  std::size_t m = 0;
  std::size_t n = 0;
  double direct_ms = 0.0;
  double factored_ms = 0.0;
  double max_rel_diff = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  double direct_slope = 0.0;
  double factored_slope = 0.0;
  bool outputs_agree = false;
};

inline constexpr double kBenchAgreementTolerance = 1e-10;

BenchResult run_bench(const BenchOptions& opt);
/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);
int cmd_bench(const BenchOptions& opt, std::ostream& out, std::ostream& err);

struct GradcheckOptions {
  std::vector<std::string> include = {"param_vector", "boundary", "distributed"};
  std::size_t coords = 50;
  std::uint64_t seed = 0;
  double h = 1e-5;
  double rel_tol = 1e-5;
  double abs_tol = 1e-7;
  double small_grad = 1e-2;  // below this magnitude the absolute tolerance applies
  std::size_t layers = 2;
  std::size_t embed = 16;
  std::size_t heads = 2;
  std::size_t experts = 2;
};

struct GradcheckCoord {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double error = 0.0;  // relative, or absolute for small gradients
  bool relative = true;
  bool pass = true;
};

struct GradcheckResult {
  std::vector<GradcheckCoord> coords;
  double max_rel_error = 0.0;
  double max_abs_error_small = 0.0;
  std::size_t parameter_count = 0;
  bool pass = false;
};

GradcheckResult run_gradcheck(const GradcheckOptions& opt);
int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace gnot
