// SPDX-License-Identifier: Apache-2.0
#include "gnot/commands.hpp"

#include <algorithm>
#include <chrono>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "gnot/checkpoint.hpp"
#include "gnot/errors.hpp"
#include "gnot/generators.hpp"
#include "gnot/kernels.hpp"
#include "gnot/run_config.hpp"
#include "gnot/training.hpp"

namespace gnot {

namespace fs = std::filesystem;

namespace {

std::string num(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

GeneratedData generate(const std::string& task, std::size_t n, std::size_t points,
                       std::size_t k_max, std::uint64_t seed) {
  if (task == "antiderivative") return gen_antiderivative(n, points, k_max, seed);
  if (task == "multiscale") return gen_multiscale(n, points, seed);
  throw ConfigError("task: expected antiderivative or multiscale, got '" + task + "'");
}

/// Names the first header field the model cannot consume.
void check_compatible(const ModelConfig& cfg, const DatasetHeader& h) {
  if (h.dim != cfg.dim)
    throw ConfigError("d: dataset has d=" + std::to_string(h.dim) + ", checkpoint expects " +
                      std::to_string(cfg.dim));
  if (h.out_dim != cfg.out_dim)
    throw ConfigError("out_dim: dataset has out_dim=" + std::to_string(h.out_dim) +
                      ", checkpoint expects " + std::to_string(cfg.out_dim));
  if (h.slots.size() != cfg.slots.size())
    throw ConfigError("L: dataset has " + std::to_string(h.slots.size()) +
                      " slots, checkpoint expects " + std::to_string(cfg.slots.size()));
  for (std::size_t l = 0; l < h.slots.size(); ++l) {
    if (h.slots[l].kind != cfg.slots[l].kind)
      throw ConfigError("slots[" + std::to_string(l) + "].kind: dataset has '" +
                        std::string(kind_name(h.slots[l].kind)) + "', checkpoint expects '" +
                        std::string(kind_name(cfg.slots[l].kind)) + "'");
    if (h.slots[l].channels != cfg.slots[l].channels)
      throw ConfigError("slots[" + std::to_string(l) + "].channels: dataset has " +
                        std::to_string(h.slots[l].channels) + ", checkpoint expects " +
                        std::to_string(cfg.slots[l].channels));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_gen_data(const GenDataOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const GeneratedData g = generate(opt.task, opt.n, opt.points, opt.k_max, opt.seed);
    const bool ok = g.oracle_max_error <= kGeneratorOracleTolerance;
    if (opt.out.has_parent_path()) fs::create_directories(opt.out.parent_path());
    save_dataset(g.dataset, opt.out);
    out << "wrote " << g.dataset.samples.size() << " samples to " << opt.out.string() << '\n'
        << "oracle check: " << g.oracle_checked << " targets, max |error| "
        << num(g.oracle_max_error) << (ok ? " (ok)" : " (FAILED)") << '\n';
    return ok ? 0 : 1;
  } catch (const std::exception& e) {
    err << "gen-data: " << e.what() << '\n';
    return 1;
  }
}

// ---------------------------------------------------------------------------

int cmd_train(const TrainCommandOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    RunConfig cfg = opt.config ? RunConfig::load(*opt.config) : RunConfig{};
    cfg.apply_overrides(opt.overrides);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.out) cfg.out_dir = *opt.out;
    cfg.validate();
    cfg.train.seed = cfg.seed;

    Dataset train_data, test_data;
    if (cfg.data.task == "file") {
      train_data = load_dataset(cfg.data.train_path);
      if (!cfg.data.test_path.empty()) test_data = load_dataset(cfg.data.test_path);
    } else {
      train_data = generate(cfg.data.task, cfg.data.n_train, cfg.data.points, cfg.data.k_max,
                            cfg.data.seed).dataset;
      if (cfg.data.n_test > 0)
        test_data = generate(cfg.data.task, cfg.data.n_test, cfg.data.points, cfg.data.k_max,
                             cfg.data.seed + 1).dataset;
    }
    if (!test_data.samples.empty() && !(test_data.header == train_data.header))
      throw ConfigError("data.test_path: test set header differs from the training set");

    const ModelConfig mc = cfg.model_config(train_data.header);
    mc.validate();
    GnotModel model(mc);
    TrainState state;
    if (opt.resume) {
      const Checkpoint ck = load_checkpoint(*opt.resume);
      restore_into(model, ck);
      if (!ck.state) throw CheckpointError("checkpoint " + opt.resume->string() + " has no training state");
      state = *ck.state;
    }

    fs::create_directories(cfg.out_dir);
    write_text(cfg.out_dir / "config.ini", cfg.to_ini());
    const Split split = split_dataset(train_data.samples, cfg.train.validation_fraction, cfg.seed);
    out << "model: " << model.params().count() << " parameters, " << split.train.size()
        << " train / " << split.validation.size() << " validation samples\n";

    TrainOptions topt;
    topt.out_dir = cfg.out_dir;
    topt.log = opt.quiet ? nullptr : &out;
    topt.stop_at_epoch = opt.stop_at_epoch;
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult res = train(model, split.train, split.validation, cfg.train, state, topt);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (res.diverged) {
      err << "train: " << res.message << '\n';
      return 3;
    }
    out << "trained " << state.epoch << " epochs in " << std::fixed << std::setprecision(1) << secs
        << " s; best epoch " << state.best_epoch << '\n';
    out.unsetf(std::ios::floatfield);

    if (state.epoch < cfg.train.epochs) return 0;  // interrupted on purpose
    const fs::path best = cfg.out_dir / "best.ckpt";
    if (fs::exists(best)) restore_into(model, load_checkpoint(best));
    const auto& eval_set = test_data.samples.empty() ? split.validation : test_data.samples;
    if (eval_set.empty()) return 0;
    const MetricReport report = evaluate(model, eval_set);
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(report.to_json());
    j["evaluated_on"] = test_data.samples.empty() ? "validation" : "test";
    j["best_epoch"] = state.best_epoch;
    j["best_val_epsilon"] = state.best_metric;
    j["epochs"] = state.epoch;
    write_text(cfg.out_dir / "report.json", j.dump(2) + "\n");
    out << j.dump(2) << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "train: " << e.what() << '\n';
    return 1;
  }
}

// ---------------------------------------------------------------------------

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const Checkpoint ck = load_checkpoint(opt.checkpoint);
    const GnotModel model = restore_model(ck);
    const Dataset data = load_dataset(opt.data);
    check_compatible(model.config(), data.header);

    const auto metrics = evaluate_samples(model, data.samples, opt.threads);
    const MetricReport report = summarize(metrics, model.config().out_dim);
    for (const auto& w : report.warnings) err << "warning: " << w << '\n';
    const std::string json = report.to_json() + "\n";
    out << json;
    if (opt.out) write_text(*opt.out / "eval.json", json);

    if (opt.per_sample_csv) {
      std::ostringstream csv;
      csv << "index,relative_l2";
      for (std::size_t c = 0; c < model.config().out_dim; ++c) csv << ",relative_l2_ch" << c;
      csv << ",mse_standardized\n";
      for (const auto& m : metrics) {
        csv << m.index << ',' << (m.epsilon ? num(*m.epsilon) : "");
        for (const auto& pc : m.per_channel) csv << ',' << (pc ? num(*pc) : "");
        csv << ',' << num(m.mse) << '\n';
      }
      write_text(*opt.per_sample_csv, csv.str());
    }
    if (opt.save_predictions) {
      Dataset pred = data;
      for (Sample& s : pred.samples) s.targets = model.predict(s);
      if (opt.save_predictions->has_parent_path())
        fs::create_directories(opt.save_predictions->parent_path());
      save_dataset(pred, *opt.save_predictions);
    }
    return 0;
  } catch (const std::exception& e) {
    err << "eval: " << e.what() << '\n';
    return 1;
  }
}

// ---------------------------------------------------------------------------

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw ContractError("loglog_slope: need at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

BenchResult run_bench(const BenchOptions& opt) {
  if (opt.min_m < 1 || opt.max_m < opt.min_m || opt.d < 1 || opt.repeats < 1)
    throw ConfigError("bench: need 1 <= min_m <= max_m, d >= 1 and repeats >= 1");
  BenchResult res;
  res.outputs_agree = true;
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  using clock = std::chrono::steady_clock;

  for (std::size_t m = opt.min_m; m <= opt.max_m; m *= 2) {
    const std::size_t n = opt.n ? opt.n : m;
    const std::size_t d = opt.d;
    std::vector<double> q(n * d), k(m * d), v(m * d), od(n * d), of(n * d);
    for (double& x : q) x = gauss(rng);
    for (double& x : k) x = gauss(rng);
    for (double& x : v) x = gauss(rng);

    kernels::parallel::normalized_attention_direct(n, m, d, q.data(), k.data(), v.data(), {}, od.data());
    kernels::parallel::normalized_attention_factored(n, m, d, q.data(), k.data(), v.data(), {}, of.data());
    double scale = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < od.size(); ++i) {
      scale = std::max(scale, std::abs(od[i]));
      diff = std::max(diff, std::abs(od[i] - of[i]));
    }
    BenchRow row;
    row.m = m;
    row.n = n;
    row.max_rel_diff = scale > 0 ? diff / scale : diff;
    if (!(row.max_rel_diff <= kBenchAgreementTolerance)) res.outputs_agree = false;

    auto time_ms = [&](auto&& fn) {
      std::vector<double> ts;
      for (std::size_t r = 0; r < opt.repeats; ++r) {
        const auto t0 = clock::now();
        fn();
        ts.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
      }
      std::nth_element(ts.begin(), ts.begin() + static_cast<std::ptrdiff_t>(ts.size() / 2), ts.end());
      return ts[ts.size() / 2];
    };
    row.direct_ms = time_ms([&] {
      kernels::parallel::normalized_attention_direct(n, m, d, q.data(), k.data(), v.data(), {}, od.data());
    });
    row.factored_ms = time_ms([&] {
      kernels::parallel::normalized_attention_factored(n, m, d, q.data(), k.data(), v.data(), {}, of.data());
    });
    res.rows.push_back(row);
  }
  std::vector<double> ms, td, tf;
  for (const auto& r : res.rows) {
    ms.push_back(static_cast<double>(r.m));
    td.push_back(r.direct_ms);
    tf.push_back(r.factored_ms);
  }
  if (res.rows.size() >= 2) {
    res.direct_slope = loglog_slope(ms, td);
    res.factored_slope = loglog_slope(ms, tf);
  }
  return res;
}

int cmd_bench(const BenchOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const BenchResult res = run_bench(opt);
    std::ostringstream csv;
    csv << "M,N,d,direct_ms,factored_ms,max_rel_diff\n";
    for (const auto& r : res.rows)
      csv << r.m << ',' << r.n << ',' << opt.d << ',' << num(r.direct_ms) << ','
          << num(r.factored_ms) << ',' << num(r.max_rel_diff) << '\n';
    std::ostringstream fit;
    fit << "form,loglog_slope\n"
        << "direct," << num(res.direct_slope) << '\n'
        << "factored," << num(res.factored_slope) << '\n';
    out << csv.str() << '\n' << fit.str();
    out << "correctness gate (max rel diff <= " << num(kBenchAgreementTolerance)
        << "): " << (res.outputs_agree ? "pass" : "FAIL") << '\n';
    if (opt.out) {
      write_text(*opt.out / "bench.csv", csv.str());
      write_text(*opt.out / "bench_slopes.csv", fit.str());
    }
    return res.outputs_agree ? 0 : 1;
  } catch (const std::exception& e) {
    err << "bench: " << e.what() << '\n';
    return 1;
  }
}

// ---------------------------------------------------------------------------

GradcheckResult run_gradcheck(const GradcheckOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0), sym(-1.0, 1.0);

  ModelConfig mc;
  mc.dim = 2;
  mc.out_dim = 1;
  mc.embed = opt.embed;
  mc.heads = opt.heads;
  mc.experts = opt.experts;
  mc.layers = opt.layers;
  mc.encoder_layers = 2;
  mc.ffn_hidden = opt.embed;
  mc.gate_hidden = 8;
  mc.seed = opt.seed;

  auto rand_matrix = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& x : m.data) x = unit(rng);
    return m;
  };
  Sample sample;
  sample.query_points = rand_matrix(7, 2);
  sample.targets = rand_matrix(7, 1);
  for (const std::string& kind : opt.include) {
    if (kind == "param_vector") {
      mc.slots.push_back({InputKind::ParamVector, 3});
      sample.inputs.emplace_back(ParamVector{{sym(rng), sym(rng), sym(rng)}});
    } else if (kind == "boundary") {
      mc.slots.push_back({InputKind::BoundaryShape, 0});
      sample.inputs.emplace_back(BoundaryShape{rand_matrix(5, 2)});
    } else if (kind == "distributed") {
      mc.slots.push_back({InputKind::DistributedFunction, 1});
      sample.inputs.emplace_back(DistributedFunction{rand_matrix(6, 2), rand_matrix(6, 1)});
    } else if (kind == "extra") {
      mc.slots.push_back({InputKind::ExtraFeatures, 1});
      sample.inputs.emplace_back(ExtraFeatures{rand_matrix(4, 2), rand_matrix(4, 1)});
    } else if (kind == "edges") {
      mc.slots.push_back({InputKind::Edges, 1});
      sample.inputs.emplace_back(Edges{rand_matrix(4, 2), rand_matrix(4, 2), rand_matrix(4, 1)});
    } else {
      throw ConfigError("include: unknown input kind '" + kind +
                        "' (expected param_vector, boundary, distributed, extra or edges)");
    }
  }
  GnotModel model(mc);
  // Move off the initialization (zero gate layer, unit norms) so every
  // parameter has a non-degenerate gradient.
  for (std::size_t i = 0; i < model.params().size(); ++i)
    for (double& x : model.params()[i].values) x += 0.1 * sym(rng);

  const ModelInput input = ModelInput::from_sample(sample);
  const attention::SeqMask all = attention::SeqMask::all(sample.query_points.rows);
  auto loss_value = [&] {
    const auto p = model.params().bind(false);
    return sample_mse(model.forward(p, input), sample.targets, all).item();
  };
  const auto bound = model.params().bind(true);
  backward(sample_mse(model.forward(bound, input), sample.targets, all));

  // A few coordinates inside each slot encoder, the rest uniform over all
  // scalars.
  std::vector<std::pair<std::size_t, std::size_t>> picks;
  const ParamStore& store = model.params();
  for (std::size_t l = 0; l < mc.slots.size(); ++l) {
    const std::string prefix = "encoder.slot" + std::to_string(l) + ".";
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < store.size(); ++i)
      if (store[i].name.rfind(prefix, 0) == 0) ids.push_back(i);
    for (int r = 0; r < 2; ++r) {
      const std::size_t id = ids[rng() % ids.size()];
      picks.emplace_back(id, rng() % store[id].values.size());
    }
  }
  const std::size_t total = store.count();
  while (picks.size() < opt.coords) {
    std::size_t flat = rng() % total;
    std::size_t id = 0;
    while (flat >= store[id].values.size()) flat -= store[id++].values.size();
    picks.emplace_back(id, flat);
  }

  GradcheckResult res;
  res.parameter_count = total;
  res.pass = true;
  for (const auto& [id, j] : picks) {
    auto g = bound[id].grad();
    const double analytic = g.empty() ? 0.0 : g[j];
    double& x = model.params()[id].values[j];
    const double x0 = x;
    x = x0 + opt.h;
    const double fp = loss_value();
    x = x0 - opt.h;
    const double fm = loss_value();
    x = x0;
    const double numeric = (fp - fm) / (2.0 * opt.h);

    GradcheckCoord c;
    c.param = store[id].name;
    c.index = j;
    c.analytic = analytic;
    c.numeric = numeric;
    const double mag = std::max(std::abs(analytic), std::abs(numeric));
    if (mag < opt.small_grad) {
      c.relative = false;
      c.error = std::abs(analytic - numeric);
      c.pass = c.error <= opt.abs_tol;
      res.max_abs_error_small = std::max(res.max_abs_error_small, c.error);
    } else {
      c.error = std::abs(analytic - numeric) / mag;
      c.pass = c.error <= opt.rel_tol;
      res.max_rel_error = std::max(res.max_rel_error, c.error);
    }
    res.pass = res.pass && c.pass;
    res.coords.push_back(std::move(c));
  }
  return res;
}

int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const GradcheckResult res = run_gradcheck(opt);
    nlohmann::ordered_json j;
    j["parameters"] = res.parameter_count;
    j["coordinates"] = res.coords.size();
    j["max_relative_error"] = res.max_rel_error;
    j["max_absolute_error_small_grads"] = res.max_abs_error_small;
    j["relative_tolerance"] = opt.rel_tol;
    j["absolute_tolerance"] = opt.abs_tol;
    j["pass"] = res.pass;
    if (!res.pass) {
      auto worst = res.coords;
      std::sort(worst.begin(), worst.end(), [](const auto& a, const auto& b) {
        return (a.pass ? 0 : 1) > (b.pass ? 0 : 1) || (a.pass == b.pass && a.error > b.error);
      });
      worst.resize(std::min<std::size_t>(worst.size(), 10));
      for (const auto& c : worst)
        j["worst"].push_back({{"param", c.param},
                              {"index", c.index},
                              {"analytic", c.analytic},
                              {"numeric", c.numeric},
                              {"error", c.error},
                              {"kind", c.relative ? "relative" : "absolute"}});
    }
    out << j.dump(2) << '\n';
    return res.pass ? 0 : 1;
  } catch (const std::exception& e) {
    err << "gradcheck: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace gnot
