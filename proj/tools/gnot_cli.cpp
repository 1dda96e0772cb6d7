// SPDX-License-Identifier: Apache-2.0
//
// gnot gen-data | train | eval | bench | gradcheck
#include <charconv>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gnot/commands.hpp"

namespace {

std::string shortest(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural operator transformer: data generation, training and diagnostics"};
  app.require_subcommand(1);

  // gen-data
  gnot::GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("task", gen.task, "antiderivative | multiscale")->required();
  gen_cmd->add_option("--n", gen.n, "number of samples");
  gen_cmd->add_option("--points", gen.points, "query points (and input points) per sample");
  gen_cmd->add_option("--k-max", gen.k_max, "sine modes of the antiderivative input");
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--out", gen.out, "output dataset path")->required();

  // train
  gnot::TrainCommandOptions tr;
  std::string block_order, gate;
  std::optional<std::size_t> experts, embed, heads, layers, epochs, batch_size;
  std::optional<double> max_lr;
  std::optional<std::string> train_data, test_data;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a run configuration");
  train_cmd->add_option("--config", tr.config, "INI run configuration");
  train_cmd->add_option("--seed", tr.seed, "run seed (model init, split, shuffling)");
  train_cmd->add_option("--out", tr.out, "output directory");
  train_cmd->add_option("--resume", tr.resume, "resume from a checkpoint with training state");
  train_cmd->add_option("--stop-at-epoch", tr.stop_at_epoch, "stop after this many epochs");
  train_cmd->add_option("--set", tr.overrides, "override section.key=value (repeatable)");
  train_cmd->add_option("--block-order", block_order, "cross+self | self+cross | cross+cross");
  train_cmd->add_option("--gate", gate, "learned | handcrafted | none");
  train_cmd->add_option("--experts", experts, "experts per FFN");
  train_cmd->add_option("--embed", embed, "embedding width");
  train_cmd->add_option("--heads", heads, "attention heads");
  train_cmd->add_option("--layers", layers, "attention blocks");
  train_cmd->add_option("--epochs", epochs, "training epochs");
  train_cmd->add_option("--batch-size", batch_size, "samples per step");
  train_cmd->add_option("--max-lr", max_lr, "peak learning rate");
  train_cmd->add_option("--train-data", train_data, "training dataset file");
  train_cmd->add_option("--test-data", test_data, "test dataset file");
  train_cmd->add_flag("--quiet", tr.quiet, "no per-epoch log");

  // eval
  gnot::EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--data", ev.data, "dataset file")->required();
  eval_cmd->add_option("--out", ev.out, "directory for eval.json");
  eval_cmd->add_option("--per-sample", ev.per_sample_csv, "per-sample CSV path");
  eval_cmd->add_option("--save-predictions", ev.save_predictions,
                       "write the dataset with predictions as targets");
  eval_cmd->add_option("--threads", ev.threads, "evaluation workers (default GNOT_NUM_THREADS)");

  // bench
  gnot::BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time direct vs factored normalized attention");
  bench_cmd->add_option("--min-m", bench.min_m, "smallest key count");
  bench_cmd->add_option("--max-m", bench.max_m, "largest key count");
  bench_cmd->add_option("--n", bench.n, "query count (0: same as M)");
  bench_cmd->add_option("--d", bench.d, "feature width");
  bench_cmd->add_option("--repeats", bench.repeats, "timed runs per point (median reported)");
  bench_cmd->add_option("--seed", bench.seed, "input seed");
  bench_cmd->add_option("--out", bench.out, "directory for bench.csv");

  // gradcheck
  gnot::GradcheckOptions gc;
  std::string include;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare autodiff with central differences");
  gc_cmd->add_option("--include", include, "comma list of input kinds");
  gc_cmd->add_option("--coords", gc.coords, "coordinates to check");
  gc_cmd->add_option("--seed", gc.seed, "seed for model, sample and coordinate picks");
  gc_cmd->add_option("--step", gc.h, "finite-difference step");
  gc_cmd->add_option("--tol", gc.rel_tol, "relative tolerance");

  CLI11_PARSE(app, argc, argv);

  if (*gen_cmd) return gnot::cmd_gen_data(gen, std::cout, std::cerr);
  if (*train_cmd) {
    if (!block_order.empty()) tr.overrides.push_back("model.order=" + block_order);
    if (!gate.empty()) tr.overrides.push_back("model.gate=" + gate);
    if (experts) tr.overrides.push_back("model.experts=" + std::to_string(*experts));
    if (embed) tr.overrides.push_back("model.embed=" + std::to_string(*embed));
    if (heads) tr.overrides.push_back("model.heads=" + std::to_string(*heads));
    if (layers) tr.overrides.push_back("model.layers=" + std::to_string(*layers));
    if (epochs) tr.overrides.push_back("train.epochs=" + std::to_string(*epochs));
    if (batch_size) tr.overrides.push_back("train.batch_size=" + std::to_string(*batch_size));
    if (max_lr) tr.overrides.push_back("train.max_lr=" + shortest(*max_lr));
    if (train_data) {
      tr.overrides.push_back("data.task=file");
      tr.overrides.push_back("data.train_path=" + *train_data);
    }
    if (test_data) tr.overrides.push_back("data.test_path=" + *test_data);
    return gnot::cmd_train(tr, std::cout, std::cerr);
  }
  if (*eval_cmd) return gnot::cmd_eval(ev, std::cout, std::cerr);
  if (*bench_cmd) return gnot::cmd_bench(bench, std::cout, std::cerr);
  if (*gc_cmd) {
    if (!include.empty()) {
      gc.include.clear();
      std::size_t start = 0;
      while (start <= include.size()) {
        const auto comma = include.find(',', start);
        const auto item = include.substr(start, comma - start);
        if (!item.empty()) gc.include.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    }
    return gnot::cmd_gradcheck(gc, std::cout, std::cerr);
  }
  return 1;
}
