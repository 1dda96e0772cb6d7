// SPDX-License-Identifier: Apache-2.0
#include "gnot/nn.hpp"

#include <cmath>

#include "gnot/errors.hpp"

namespace gnot {

std::size_t ParamStore::add(std::string name, Shape shape, std::vector<double> values) {
  if (find(name)) throw ContractError("duplicate parameter name " + name);
  entries_.push_back({std::move(name), std::move(shape), std::move(values)});
  return entries_.size() - 1;
}

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.values.size();
  return n;
}

std::optional<std::size_t> ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  return std::nullopt;
}

std::vector<Tensor> ParamStore::bind(bool requires_grad) const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_)
    out.push_back(requires_grad ? Tensor::parameter(e.shape, e.values)
                                : Tensor::constant(e.shape, e.values));
  return out;
}

std::vector<double> glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> w(fan_in * fan_out);
  for (double& x : w) x = dist(rng);
  return w;
}

Linear Linear::create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                      bool with_bias, Rng& rng) {
  Linear l;
  l.in = in;
  l.out = out;
  l.weight = store.add(name + ".weight", {in, out}, glorot_uniform(in, out, rng));
  if (with_bias) l.bias = store.add(name + ".bias", {1, out}, std::vector<double>(out, 0.0));
  return l;
}

Tensor Linear::forward(ParamView p, const Tensor& x) const {
  Tensor y = matmul(x, p[weight]);
  return bias ? add_row(y, p[*bias]) : y;
}

Mlp Mlp::create(ParamStore& store, const std::string& name, const std::vector<std::size_t>& widths,
                Rng& rng) {
  if (widths.size() < 2) throw ConfigError(name + ": an MLP needs at least one layer");
  Mlp m;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    m.layers.push_back(
        Linear::create(store, name + "." + std::to_string(i), widths[i], widths[i + 1], true, rng));
  return m;
}

Tensor Mlp::forward(ParamView p, const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(p, h);
    if (i + 1 < layers.size()) h = gelu(h);
  }
  return h;
}

LayerNorm LayerNorm::create(ParamStore& store, const std::string& name, std::size_t width) {
  LayerNorm ln;
  ln.gamma = store.add(name + ".gamma", {1, width}, std::vector<double>(width, 1.0));
  ln.beta = store.add(name + ".beta", {1, width}, std::vector<double>(width, 0.0));
  return ln;
}

Tensor LayerNorm::forward(ParamView p, const Tensor& x) const {
  return layer_norm(x, p[gamma], p[beta]);
}

}  // namespace gnot
