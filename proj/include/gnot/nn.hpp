// SPDX-License-Identifier: Apache-2.0
//
// Parameter storage and the small layer vocabulary the model is built from.
// Layers hold indices into a ParamStore; a forward pass receives the bound
// tensors as a ParamView so one set of values can back many graphs.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gnot/tensor.hpp"

namespace gnot {

using ParamView = std::span<const Tensor>;
using Rng = std::mt19937_64;

class ParamStore {
 public:
  struct Entry {
    std::string name;
    Shape shape;
    std::vector<double> values;
  };

  std::size_t add(std::string name, Shape shape, std::vector<double> values);
  std::size_t size() const { return entries_.size(); }
  /// Total number of scalar parameters.
  std::size_t count() const;
  std::optional<std::size_t> find(const std::string& name) const;

  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  Entry& operator[](std::size_t i) { return entries_[i]; }
  const std::vector<Entry>& entries() const { return entries_; }

  /// Fresh leaf tensors holding copies of the current values.
  std::vector<Tensor> bind(bool requires_grad) const;

 private:
  std::vector<Entry> entries_;
};

/// y = x W (+ b), W stored [in, out].
struct Linear {
  std::size_t weight = 0;
  std::optional<std::size_t> bias;
  std::size_t in = 0;
  std::size_t out = 0;

  static Linear create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                       bool with_bias, Rng& rng);
  Tensor forward(ParamView p, const Tensor& x) const;
};

/// Fully connected stack with GELU between layers and a linear output.
struct Mlp {
  std::vector<Linear> layers;

  /// widths = {in, hidden..., out}.
  static Mlp create(ParamStore& store, const std::string& name,
                    const std::vector<std::size_t>& widths, Rng& rng);
  Tensor forward(ParamView p, const Tensor& x) const;
  std::size_t in() const { return layers.front().in; }
  std::size_t out() const { return layers.back().out; }
};

struct LayerNorm {
  std::size_t gamma = 0;
  std::size_t beta = 0;

  static LayerNorm create(ParamStore& store, const std::string& name, std::size_t width);
  Tensor forward(ParamView p, const Tensor& x) const;
};

std::vector<double> glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace gnot
