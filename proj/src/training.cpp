// SPDX-License-Identifier: Apache-2.0
#include "gnot/training.hpp"

#include <omp.h>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>

#include <json.hpp>

#include "gnot/checkpoint.hpp"
#include "gnot/errors.hpp"

namespace gnot {

namespace {

std::string num(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void TrainConfig::validate() const {
  std::vector<std::string> errs;
  if (epochs < 1) errs.push_back("epochs: must be at least 1");
  if (batch_size < 1) errs.push_back("batch_size: must be at least 1");
  if (!(max_lr > 0.0)) errs.push_back("max_lr: must be positive");
  if (!(weight_decay >= 0.0)) errs.push_back("weight_decay: must be non-negative");
  if (!(grad_clip_norm >= 0.0)) errs.push_back("grad_clip: must be non-negative");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    errs.push_back("validation_fraction: must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) errs.push_back("beta1: must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) errs.push_back("beta2: must lie in [0, 1)");
  if (!(eps > 0.0)) errs.push_back("eps: must be positive");
  if (const auto* oc = std::get_if<OneCycle>(&schedule)) {
    if (!(oc->div_factor > 0.0)) errs.push_back("div_factor: must be positive");
    if (!(oc->final_div_factor > 0.0)) errs.push_back("final_div_factor: must be positive");
    if (!(oc->pct_warmup > 0.0 && oc->pct_warmup < 1.0))
      errs.push_back("pct_warmup: must lie strictly between 0 and 1");
  } else {
    const auto& ed = std::get<ExponentialDecay>(schedule);
    if (!(ed.gamma > 0.0 && ed.gamma <= 1.0)) errs.push_back("gamma: must lie in (0, 1]");
  }
  if (errs.empty()) return;
  std::string msg;
  for (const auto& e : errs) msg += (msg.empty() ? "" : "; ") + e;
  throw ConfigError(msg);
}

double one_cycle_lr(std::size_t step, std::size_t total, double max_lr, const OneCycle& cfg) {
  const double initial = max_lr / cfg.div_factor;
  const double final_lr = max_lr / cfg.final_div_factor;
  if (total == 0) return max_lr;
  const double s = static_cast<double>(std::min(step, total));
  const double warm = cfg.pct_warmup * static_cast<double>(total);
  auto cosine = [](double from, double to, double frac) {
    return to + (from - to) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
  };
  if (s <= warm) return cosine(initial, max_lr, s / warm);
  return cosine(max_lr, final_lr, (s - warm) / (static_cast<double>(total) - warm));
}

double exponential_lr(std::size_t epoch, double max_lr, const ExponentialDecay& cfg) {
  return max_lr * std::pow(cfg.gamma, static_cast<double>(epoch));
}

double scheduled_lr(const TrainConfig& cfg, std::size_t step, std::size_t total_steps,
                    std::size_t epoch) {
  if (const auto* oc = std::get_if<OneCycle>(&cfg.schedule))
    return one_cycle_lr(step, total_steps, cfg.max_lr, *oc);
  return exponential_lr(epoch, cfg.max_lr, std::get<ExponentialDecay>(cfg.schedule));
}

AdamWState AdamWState::zeros_like(const ParamStore& params) {
  AdamWState s;
  for (const auto& e : params.entries()) {
    s.m.emplace_back(e.values.size(), 0.0);
    s.v.emplace_back(e.values.size(), 0.0);
  }
  return s;
}

bool adamw_step(ParamStore& params, std::span<const std::vector<double>> grads, AdamWState& state,
                double lr, double weight_decay, double beta1, double beta2, double eps) {
  if (grads.size() != params.size() || state.m.size() != params.size())
    throw ContractError("adamw_step: gradient/state count does not match parameters");
  for (const auto& g : grads)
    for (double x : g)
      if (!std::isfinite(x)) return false;

  const std::uint64_t t = state.step + 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].values;
    const auto& g = grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (g.size() != w.size() || m.size() != w.size())
      throw ContractError("adamw_step: size mismatch for " + params[i].name);
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * w[j]);
    }
  }
  state.step = t;
  return true;
}

double clip_grad_norm(std::vector<std::vector<double>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double x : g) sq += x * x;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm && std::isfinite(norm)) {
    const double f = max_norm / norm;
    for (auto& g : grads)
      for (double& x : g) x *= f;
  }
  return norm;
}

Tensor sample_mse(const Tensor& pred, const Matrix& target, const attention::SeqMask& mask) {
  if (pred.rows() != target.rows || pred.cols() != target.cols)
    throw DimensionError("sample_mse: prediction " + shape_string(pred.shape()) +
                         " vs target [" + std::to_string(target.rows) + "," +
                         std::to_string(target.cols) + "]");
  const std::size_t valid = mask.valid.empty() ? target.rows : mask.count();
  if (valid == 0) throw ContractError("sample_mse: no valid positions");
  Tensor diff = sub(pred, Tensor::constant({target.rows, target.cols}, target.data));
  if (!mask.valid.empty() && valid != target.rows) diff = mask_rows(diff, mask.valid);
  return scale(sum_all(mul(diff, diff)), 1.0 / static_cast<double>(valid));
}

Tensor mse_loss(std::span<const Tensor> preds, std::span<const Matrix> targets,
                std::span<const attention::SeqMask> masks) {
  if (preds.empty() || preds.size() != targets.size() || preds.size() != masks.size())
    throw ContractError("mse_loss: need equally many predictions, targets and masks");
  Tensor total;
  for (std::size_t b = 0; b < preds.size(); ++b) {
    Tensor l = sample_mse(preds[b], targets[b], masks[b]);
    total = b == 0 ? l : add(total, l);
  }
  return scale(total, 1.0 / static_cast<double>(preds.size()));
}

std::optional<double> relative_l2(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw DimensionError("relative_l2: length mismatch");
  double num_sq = 0.0, den_sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    num_sq += d * d;
    den_sq += truth[i] * truth[i];
  }
  if (den_sq == 0.0) return std::nullopt;
  return std::sqrt(num_sq) / std::sqrt(den_sq);
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double x : values) s += x;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

unsigned default_threads() {
  if (const char* env = std::getenv("GNOT_NUM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return static_cast<unsigned>(omp_get_max_threads());
}

std::vector<SampleMetric> evaluate_samples(const GnotModel& model,
                                           const std::vector<Sample>& samples, unsigned threads) {
  if (samples.empty()) throw ContractError("no samples");
  if (threads == 0) threads = default_threads();
  const std::size_t channels = model.config().out_dim;
  std::vector<SampleMetric> out(samples.size());
  std::vector<std::exception_ptr> errors(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());

#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const Sample& s = samples[static_cast<std::size_t>(i)];
      const Matrix pred_std = model.forward(s).to_matrix();
      const Matrix pred = model.normalizers().targets.invert(pred_std);
      const Matrix tgt_std = model.normalizers().targets.apply(s.targets);
      SampleMetric m;
      m.index = static_cast<std::size_t>(i);
      m.epsilon = relative_l2(pred.data, s.targets.data);
      std::vector<double> pc(pred.rows), tc(pred.rows);
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t r = 0; r < pred.rows; ++r) {
          pc[r] = pred(r, c);
          tc[r] = s.targets(r, c);
        }
        m.per_channel.push_back(relative_l2(pc, tc));
      }
      double sq = 0.0;
      for (std::size_t k = 0; k < pred_std.data.size(); ++k) {
        const double d = pred_std.data[k] - tgt_std.data[k];
        sq += d * d;
      }
      m.mse = sq / static_cast<double>(pred_std.rows);
      out[static_cast<std::size_t>(i)] = std::move(m);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

MetricReport summarize(std::span<const SampleMetric> metrics, std::size_t channels) {
  MetricReport r;
  r.samples = metrics.size();
  if (metrics.empty()) throw ContractError("no samples");
  std::vector<double> eps, mse;
  for (const auto& m : metrics) {
    mse.push_back(m.mse);
    if (m.epsilon) eps.push_back(*m.epsilon);
  }
  r.excluded = metrics.size() - eps.size();
  r.mse = pairwise_sum(mse) / static_cast<double>(mse.size());
  r.aggregate = eps.empty() ? 0.0 : pairwise_sum(eps) / static_cast<double>(eps.size());
  if (r.excluded > 0)
    r.warnings.push_back(std::to_string(r.excluded) +
                         " sample(s) with zero-norm targets excluded from the relative error");
  for (std::size_t c = 0; c < channels; ++c) {
    std::vector<double> vals;
    for (const auto& m : metrics)
      if (c < m.per_channel.size() && m.per_channel[c]) vals.push_back(*m.per_channel[c]);
    r.per_channel.push_back(vals.empty() ? 0.0 : pairwise_sum(vals) / static_cast<double>(vals.size()));
    if (vals.size() < metrics.size())
      r.warnings.push_back("channel " + std::to_string(c) + ": " +
                           std::to_string(metrics.size() - vals.size()) +
                           " zero-norm sample(s) excluded");
  }
  return r;
}

MetricReport evaluate(const GnotModel& model, const std::vector<Sample>& samples, unsigned threads) {
  const auto metrics = evaluate_samples(model, samples, threads);
  return summarize(metrics, model.config().out_dim);
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["samples"] = samples;
  j["excluded"] = excluded;
  j["relative_l2"] = aggregate;
  j["relative_l2_per_channel"] = per_channel;
  j["mse_standardized"] = mse;
  j["warnings"] = warnings;
  return j.dump(2);
}

void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out) {
  out << "epoch,train_loss,val_epsilon,lr,rejected_steps\n";
  for (const auto& r : history)
    out << r.epoch << ',' << num(r.train_loss) << ',' << num(r.val_epsilon) << ',' << num(r.lr)
        << ',' << r.rejected_steps << '\n';
}

TrainResult train(GnotModel& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const TrainConfig& cfg, TrainState& state,
                  const TrainOptions& options) {
  cfg.validate();
  if (train_set.empty()) throw ContractError("train: no samples");
  std::ostream* log = options.log;

  const bool fresh = state.epoch == 0 && state.optimizer.step == 0 && state.history.empty();
  if (fresh) {
    ModelNormalizers norms = fit_normalizers(train_set, model.config());
    if (log) {
      for (const auto& w : norms.coords.warnings()) *log << "normalizer (coords): " << w << '\n';
      for (std::size_t l = 0; l < norms.slots.size(); ++l)
        for (const auto& w : norms.slots[l].warnings())
          *log << "normalizer (slot " << l << "): " << w << '\n';
      for (const auto& w : norms.targets.warnings()) *log << "normalizer (targets): " << w << '\n';
    }
    model.set_normalizers(std::move(norms));
    state.optimizer = AdamWState::zeros_like(model.params());
    state.seed = cfg.seed;
    state.best_metric = std::numeric_limits<double>::infinity();
    state.best_epoch = 0;
  } else if (state.optimizer.m.size() != model.params().size()) {
    throw ContractError("train: resumed optimizer state does not match the model");
  }

  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);
  const std::size_t steps_per_epoch = (train_set.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;
  const Normalizer& tnorm = model.normalizers().targets;

  for (std::size_t epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
    if (options.stop_at_epoch && epoch >= *options.stop_at_epoch) break;
    const auto batches = make_batches(train_set, cfg.batch_size, splitmix64(state.seed + epoch));
    std::vector<double> losses;
    losses.reserve(train_set.size());
    EpochRecord rec;
    rec.epoch = epoch + 1;

    for (const Batch& batch : batches) {
      const auto bound = model.params().bind(true);
      const double inv_b = 1.0 / static_cast<double>(batch.size());
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const Tensor pred = model.forward(bound, batch.inputs[b]);
        const Tensor loss = sample_mse(pred, tnorm.apply(batch.targets[b]), batch.inputs[b].query_mask);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          TrainResult res{true, "training diverged at epoch " + std::to_string(epoch + 1) +
                                    " (non-finite loss); last good checkpoint kept"};
          if (log) *log << res.message << '\n';
          return res;
        }
        losses.push_back(value);
        backward(scale(loss, inv_b));
      }
      std::vector<std::vector<double>> grads(bound.size());
      for (std::size_t i = 0; i < bound.size(); ++i) {
        auto g = bound[i].grad();
        grads[i] = g.empty() ? std::vector<double>(bound[i].numel(), 0.0)
                             : std::vector<double>(g.begin(), g.end());
      }
      clip_grad_norm(grads, cfg.grad_clip_norm);
      rec.lr = scheduled_lr(cfg, state.optimizer.step, total_steps, epoch);
      if (!adamw_step(model.params(), grads, state.optimizer, rec.lr, cfg.weight_decay, cfg.beta1,
                      cfg.beta2, cfg.eps)) {
        ++rec.rejected_steps;
        if (log) *log << "epoch " << epoch + 1 << ": non-finite gradient, step rejected\n";
      }
    }

    rec.train_loss = pairwise_sum(losses) / static_cast<double>(losses.size());
    rec.val_epsilon = val_set.empty() ? rec.train_loss
                                      : evaluate(model, val_set, options.eval_threads).aggregate;
    state.history.push_back(rec);
    state.epoch = epoch + 1;
    const bool improved = rec.val_epsilon < state.best_metric;
    if (improved) {
      state.best_metric = rec.val_epsilon;
      state.best_epoch = rec.epoch;
    }
    if (log)
      *log << "epoch " << rec.epoch << "/" << cfg.epochs << "  loss " << rec.train_loss
           << "  val_eps " << rec.val_epsilon << "  lr " << rec.lr << (improved ? "  *" : "")
           << '\n';

    if (!options.out_dir.empty()) {
      if (improved) save_checkpoint(options.out_dir / "best.ckpt", model, &state);
      save_checkpoint(options.out_dir / "last.ckpt", model, &state);
      std::ofstream hist(options.out_dir / "history.csv", std::ios::binary | std::ios::trunc);
      write_history_csv(state.history, hist);
    }
  }
  return {};
}

}  // namespace gnot
