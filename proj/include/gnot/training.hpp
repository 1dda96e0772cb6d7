// SPDX-License-Identifier: Apache-2.0
//
// Objective, metric, optimizer, schedules and the training loop.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gnot/data.hpp"
#include "gnot/model.hpp"

namespace gnot {

struct OneCycle {
  double div_factor = 25.0;
  double final_div_factor = 1e4;
  double pct_warmup = 0.3;
};

struct ExponentialDecay {
  double gamma = 0.98;  // per epoch
};

using Schedule = std::variant<OneCycle, ExponentialDecay>;

struct TrainConfig {
  std::size_t epochs = 500;
  std::size_t batch_size = 8;
  double max_lr = 1e-3;
  double weight_decay = 1e-4;
  Schedule schedule = OneCycle{};
  double grad_clip_norm = 1.0;  // 0 disables clipping
  double validation_fraction = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;

  /// Throws ConfigError listing every invalid field.
  void validate() const;
};

/// Cosine warmup from max_lr/div_factor to max_lr over pct_warmup*total
/// steps, then cosine annealing to max_lr/final_div_factor at `total`.
double one_cycle_lr(std::size_t step, std::size_t total, double max_lr, const OneCycle& cfg);
double exponential_lr(std::size_t epoch, double max_lr, const ExponentialDecay& cfg);
/// Learning rate for optimizer step `step` of epoch `epoch`.
double scheduled_lr(const TrainConfig& cfg, std::size_t step, std::size_t total_steps,
                    std::size_t epoch);

struct AdamWState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamWState zeros_like(const ParamStore& params);
  friend bool operator==(const AdamWState&, const AdamWState&) = default;
};

/// One decoupled-decay Adam update with bias correction. Returns false and
/// leaves parameters and state untouched when any gradient is non-finite.
bool adamw_step(ParamStore& params, std::span<const std::vector<double>> grads, AdamWState& state,
                double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

/// Scales gradients so their global L2 norm is at most `max_norm`; returns
/// the norm before clipping.
double clip_grad_norm(std::vector<std::vector<double>>& grads, double max_norm);

/// (1/N'_valid) sum over valid rows and channels of (pred - target)^2.
Tensor sample_mse(const Tensor& pred, const Matrix& target, const attention::SeqMask& mask);
/// Mean of sample_mse over the samples.
Tensor mse_loss(std::span<const Tensor> preds, std::span<const Matrix> targets,
                std::span<const attention::SeqMask> masks);

/// ||pred - truth|| / ||truth||; nullopt when ||truth|| = 0.
std::optional<double> relative_l2(std::span<const double> pred, std::span<const double> truth);

/// Order-fixed pairwise summation.
double pairwise_sum(std::span<const double> values);

struct SampleMetric {
  std::size_t index = 0;
  std::optional<double> epsilon;                   // all channels together
  std::vector<std::optional<double>> per_channel;  // one entry per channel
  double mse = 0.0;                                // standardized units
};

struct MetricReport {
  std::vector<double> per_channel;  // mean epsilon per channel
  double aggregate = 0.0;           // mean epsilon over samples
  double mse = 0.0;                 // mean objective in standardized units
  std::size_t samples = 0;
  std::size_t excluded = 0;  // zero-norm samples left out of `aggregate`
  std::vector<std::string> warnings;

  std::string to_json() const;
};

/// Per-sample metrics in original target units. Forward passes fan out over
/// `threads` workers (0 = GNOT_NUM_THREADS or the OpenMP default).
std::vector<SampleMetric> evaluate_samples(const GnotModel& model,
                                           const std::vector<Sample>& samples,
                                           unsigned threads = 0);
MetricReport summarize(std::span<const SampleMetric> metrics, std::size_t channels);
MetricReport evaluate(const GnotModel& model, const std::vector<Sample>& samples,
                      unsigned threads = 0);

/// Worker count from GNOT_NUM_THREADS, else the OpenMP default.
unsigned default_threads();

struct EpochRecord {
  std::uint64_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_epsilon = 0.0;
  double lr = 0.0;  // at the last step of the epoch
  std::uint64_t rejected_steps = 0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainState {
  AdamWState optimizer;
  std::uint64_t epoch = 0;  // completed epochs
  double best_metric = 0.0;
  std::uint64_t best_epoch = 0;  // 0 = none yet
  std::uint64_t seed = 0;
  std::vector<EpochRecord> history;

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // empty = no checkpoints or history files
  std::ostream* log = nullptr;
  /// Stop after this many completed epochs (for interrupted runs).
  std::optional<std::size_t> stop_at_epoch;
  unsigned eval_threads = 0;
};

struct TrainResult {
  bool diverged = false;
  std::string message;
};

/// Minimizes the standardized MSE on `train_set`, validating on `val_set`
/// after every epoch (train loss is used when it is empty). A fresh state
/// fits the model's normalizers on `train_set`. With an output directory,
/// writes last.ckpt every epoch, best.ckpt on validation improvement and
/// history.csv.
TrainResult train(GnotModel& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const TrainConfig& cfg, TrainState& state,
                  const TrainOptions& options = {});

void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out);

}  // namespace gnot
