// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: INI-style text with [model], [data], [train] and
// [output] sections plus top-level `seed`. Every key has a default, unknown
// keys are rejected and all problems are reported together.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gnot/data.hpp"
#include "gnot/model.hpp"
#include "gnot/training.hpp"

namespace gnot {

struct ModelSection {
  std::size_t embed = 64;
  std::size_t heads = 4;
  std::size_t experts = 1;
  std::size_t layers = 3;
  std::size_t encoder_layers = 3;
  std::size_t ffn_hidden = 0;  // 0 = embed
  std::size_t gate_hidden = 32;
  BlockOrder order = BlockOrder::CrossSelf;
  GateMode gate = GateMode::Learned;
  std::size_t gate_axis = 0;
  std::vector<double> gate_thresholds;
};

struct DataSection {
  std::string task = "antiderivative";  // antiderivative | multiscale | file
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  std::size_t n_train = 1000;
  std::size_t n_test = 100;
  std::size_t points = 128;
  std::size_t k_max = 5;
  std::uint64_t seed = 7;  // generator seed, independent of the run seed
};

struct RunConfig {
  std::uint64_t seed = 0;
  ModelSection model;
  DataSection data;
  TrainConfig train;
  std::filesystem::path out_dir = "runs/latest";

  /// Parses INI text; throws ConfigError listing every bad key or value.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  /// Applies one `section.key=value` (or `seed=value`) override.
  void set(const std::string& section, const std::string& key, const std::string& value);
  /// Applies `section.key=value` strings; errors are collected and thrown together.
  void apply_overrides(const std::vector<std::string>& overrides);
  /// Throws ConfigError listing every invalid field.
  void validate() const;

  /// Effective configuration in the same INI format.
  std::string to_ini() const;
  ModelConfig model_config(const DatasetHeader& header) const;
};

}  // namespace gnot
