// SPDX-License-Identifier: Apache-2.0
#include "gnot/model.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "gnot/errors.hpp"

namespace gnot {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string fmt_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  return v;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

std::string slot_field(std::size_t l, const char* what) {
  return "slots[" + std::to_string(l) + "]." + what;
}

}  // namespace

// ---------------------------------------------------------------------------
// Enumerations and configuration.

std::string_view block_order_name(BlockOrder order) {
  switch (order) {
    case BlockOrder::CrossSelf: return "cross+self";
    case BlockOrder::SelfCross: return "self+cross";
    case BlockOrder::CrossCross: return "cross+cross";
  }
  return "unknown";
}

BlockOrder parse_block_order(std::string_view name) {
  for (auto o : {BlockOrder::CrossSelf, BlockOrder::SelfCross, BlockOrder::CrossCross})
    if (block_order_name(o) == name) return o;
  throw ConfigError("order: unknown block order '" + std::string(name) +
                    "' (expected cross+self, self+cross or cross+cross)");
}

std::string_view gate_mode_name(GateMode mode) {
  switch (mode) {
    case GateMode::Learned: return "learned";
    case GateMode::Handcrafted: return "handcrafted";
    case GateMode::None: return "none";
  }
  return "unknown";
}

GateMode parse_gate_mode(std::string_view name) {
  for (auto m : {GateMode::Learned, GateMode::Handcrafted, GateMode::None})
    if (gate_mode_name(m) == name) return m;
  throw ConfigError("gate: unknown gate mode '" + std::string(name) +
                    "' (expected learned, handcrafted or none)");
}

std::size_t HandcraftedGate::expert_for(std::span<const double> point) const {
  const double x = point[axis];
  return static_cast<std::size_t>(
      std::upper_bound(thresholds.begin(), thresholds.end(), x) - thresholds.begin());
}

void ModelConfig::validate() const {
  require(dim >= 1, "dim: must be at least 1");
  require(out_dim >= 1, "out_dim: must be at least 1");
  require(!slots.empty(), "slots: at least one input slot is required");
  for (std::size_t l = 0; l < slots.size(); ++l) {
    const SlotSpec& s = slots[l];
    if (s.kind == InputKind::ParamVector)
      require(s.channels >= 1, slot_field(l, "channels") + ": a parameter vector needs p >= 1");
    if (s.kind == InputKind::BoundaryShape)
      require(s.channels == 0, slot_field(l, "channels") + ": boundary slots carry no channels");
  }
  require(embed >= 1, "embed: must be at least 1");
  require(heads >= 1, "heads: must be at least 1");
  require(embed % heads == 0, "heads: " + std::to_string(heads) + " does not divide embed " +
                                  std::to_string(embed));
  require(experts >= 1, "experts: must be at least 1");
  require(layers >= 1, "layers: must be at least 1");
  require(encoder_layers >= 1, "encoder_layers: must be at least 1");
  require(ffn_hidden >= 1, "ffn_hidden: must be at least 1");
  require(gate_hidden >= 1, "gate_hidden: must be at least 1");
  if (gate == GateMode::None)
    require(experts == 1, "experts: gate mode 'none' is a plain FFN and needs experts = 1");
  if (gate == GateMode::Handcrafted) {
    require(handcrafted.axis < dim, "gate_axis: " + std::to_string(handcrafted.axis) +
                                        " is not a coordinate axis for dim " +
                                        std::to_string(dim));
    require(handcrafted.thresholds.size() + 1 == experts,
            "gate_thresholds: " + std::to_string(handcrafted.thresholds.size()) +
                " thresholds cut " + std::to_string(handcrafted.thresholds.size() + 1) +
                " subdomains but experts = " + std::to_string(experts));
    require(std::is_sorted(handcrafted.thresholds.begin(), handcrafted.thresholds.end()),
            "gate_thresholds: must be ascending");
  }
}

std::string ModelConfig::serialize() const {
  std::ostringstream os;
  os << "dim=" << dim << '\n' << "out_dim=" << out_dim << '\n' << "slots=";
  for (std::size_t l = 0; l < slots.size(); ++l)
    os << (l ? "," : "") << kind_name(slots[l].kind) << ':' << slots[l].channels;
  os << '\n'
     << "embed=" << embed << '\n'
     << "heads=" << heads << '\n'
     << "experts=" << experts << '\n'
     << "layers=" << layers << '\n'
     << "encoder_layers=" << encoder_layers << '\n'
     << "ffn_hidden=" << ffn_hidden << '\n'
     << "gate_hidden=" << gate_hidden << '\n'
     << "order=" << block_order_name(order) << '\n'
     << "gate=" << gate_mode_name(gate) << '\n'
     << "gate_axis=" << handcrafted.axis << '\n'
     << "gate_thresholds=";
  for (std::size_t i = 0; i < handcrafted.thresholds.size(); ++i)
    os << (i ? "," : "") << fmt_double(handcrafted.thresholds[i]);
  os << '\n' << "seed=" << seed << '\n';
  return os.str();
}

ModelConfig ModelConfig::parse(std::string_view text) {
  ModelConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("model config: expected key=value, got '" + line + "'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key == "dim") c.dim = parse_uint(key, value);
    else if (key == "out_dim") c.out_dim = parse_uint(key, value);
    else if (key == "slots") {
      c.slots.clear();
      for (const auto& item : split(value, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos)
          throw ConfigError("slots: expected kind:channels, got '" + item + "'");
        c.slots.push_back({parse_kind(item.substr(0, colon)),
                           static_cast<std::size_t>(parse_uint(key, item.substr(colon + 1)))});
      }
    } else if (key == "embed") c.embed = parse_uint(key, value);
    else if (key == "heads") c.heads = parse_uint(key, value);
    else if (key == "experts") c.experts = parse_uint(key, value);
    else if (key == "layers") c.layers = parse_uint(key, value);
    else if (key == "encoder_layers") c.encoder_layers = parse_uint(key, value);
    else if (key == "ffn_hidden") c.ffn_hidden = parse_uint(key, value);
    else if (key == "gate_hidden") c.gate_hidden = parse_uint(key, value);
    else if (key == "order") c.order = parse_block_order(value);
    else if (key == "gate") c.gate = parse_gate_mode(value);
    else if (key == "gate_axis") c.handcrafted.axis = parse_uint(key, value);
    else if (key == "gate_thresholds") {
      c.handcrafted.thresholds.clear();
      for (const auto& item : split(value, ','))
        c.handcrafted.thresholds.push_back(parse_double(key, item));
    } else if (key == "seed") c.seed = parse_uint(key, value);
    else throw ConfigError("model config: unknown key '" + key + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Layers.

Tensor GateNetwork::weights(ParamView p, const Matrix& coords_std, const Matrix& coords_raw) const {
  const std::size_t n = coords_raw.rows;
  if (experts == 1) return Tensor::constant({n, 1}, std::vector<double>(n, 1.0));
  if (mode == GateMode::Handcrafted) {
    std::vector<double> w(n * experts, 0.0);
    for (std::size_t t = 0; t < n; ++t) w[t * experts + handcrafted.expert_for(coords_raw.row(t))] = 1.0;
    return Tensor::constant({n, experts}, std::move(w));
  }
  return softmax_lastdim(mlp.forward(p, Tensor::constant(coords_std)));
}

std::vector<double> gate_weights(ParamView p, const GateNetwork& gate,
                                 std::span<const double> coords_std,
                                 std::span<const double> coords_raw) {
  const Matrix xs(1, coords_std.size(), {coords_std.begin(), coords_std.end()});
  const Matrix xr(1, coords_raw.size(), {coords_raw.begin(), coords_raw.end()});
  const Tensor w = gate.weights(p, xs, xr);
  return {w.values().begin(), w.values().end()};
}

std::size_t GnotBlock::cross_count() const {
  return static_cast<std::size_t>(std::count_if(attention.begin(), attention.end(), [](const auto& a) {
    return std::holds_alternative<CrossLayer>(a);
  }));
}

std::size_t GnotBlock::self_count() const { return attention.size() - cross_count(); }

Tensor hna_cross(ParamView p, const CrossLayer& layer, const Tensor& x,
                 std::span<const ConditionalEmbedding> inputs, std::size_t heads,
                 attention::Form form) {
  const std::size_t slots = layer.wk.size();
  if (inputs.size() != slots)
    throw ConfigError("slots: cross layer has " + std::to_string(slots) + " slots, got " +
                      std::to_string(inputs.size()) + " embeddings");
  auto q = attention::split_heads(layer.wq.forward(p, x), heads);
  for (auto& qh : q) qh = softmax_lastdim(qh);

  std::vector<Tensor> acc(heads);
  for (std::size_t l = 0; l < slots; ++l) {
    auto k = attention::split_heads(layer.wk[l].forward(p, inputs[l].y), heads);
    auto v = attention::split_heads(layer.wv[l].forward(p, inputs[l].y), heads);
    for (std::size_t h = 0; h < heads; ++h) {
      Tensor term = attention::attend_normalized(q[h], softmax_lastdim(k[h]), v[h],
                                                 inputs[l].mask, form);
      acc[h] = l == 0 ? term : add(acc[h], term);
    }
  }
  const double inv_l = 1.0 / static_cast<double>(slots);
  std::vector<Tensor> out(heads);
  for (std::size_t h = 0; h < heads; ++h) out[h] = add(q[h], scale(acc[h], inv_l));
  return attention::merge_heads(out);
}

Tensor self_attention_update(ParamView p, const SelfLayer& layer, const Tensor& z,
                             const attention::SeqMask& mask, std::size_t heads,
                             attention::Form form) {
  const Tensor h = layer.norm.forward(p, z);
  Tensor attn = attention::multihead_normalized_attention(
      layer.wq.forward(p, h), layer.wk.forward(p, h), layer.wv.forward(p, h), mask, heads, form);
  return add(z, attn);
}

Tensor moe_ffn_update(ParamView p, const MoeLayer& layer, const Tensor& z,
                      const QueryGeometry& geometry) {
  const Tensor h = layer.norm.forward(p, z);
  const auto& experts = layer.experts.experts;
  if (experts.size() == 1) return add(z, experts.front().forward(p, h));

  const Tensor w = layer.gate.weights(p, geometry.coords_std, geometry.coords_raw);
  Tensor mix;
  for (std::size_t k = 0; k < experts.size(); ++k) {
    Tensor term = mul_col(experts[k].forward(p, h), slice_cols(w, k, 1));
    mix = k == 0 ? term : add(mix, term);
  }
  return add(z, mix);
}

// ---------------------------------------------------------------------------
// Normalization statistics.

ModelNormalizers ModelNormalizers::identity(const ModelConfig& config) {
  ModelNormalizers n;
  n.coords = Normalizer::identity(config.dim);
  for (const SlotSpec& s : config.slots)
    n.slots.push_back(Normalizer::identity(feature_width(s, config.dim)));
  n.targets = Normalizer::identity(config.out_dim);
  return n;
}

ModelNormalizers fit_normalizers(const std::vector<Sample>& train, const ModelConfig& config) {
  if (train.empty()) throw ContractError("fit_normalizers: no samples");
  ModelNormalizers n;
  std::vector<const Matrix*> coords, targets;
  for (const Sample& s : train) {
    coords.push_back(&s.query_points);
    targets.push_back(&s.targets);
  }
  n.coords = Normalizer::fit(coords);
  n.targets = Normalizer::fit(targets);
  for (std::size_t l = 0; l < config.slots.size(); ++l) {
    std::vector<Matrix> rows;
    rows.reserve(train.size());
    for (const Sample& s : train) rows.push_back(feature_rows(s.inputs.at(l)));
    std::vector<const Matrix*> ptrs;
    for (const Matrix& m : rows) ptrs.push_back(&m);
    n.slots.push_back(Normalizer::fit(ptrs));
  }
  return n;
}

// ---------------------------------------------------------------------------
// Model.

GnotModel::GnotModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  Rng rng(config_.seed);
  const std::size_t ne = config_.embed;
  const std::size_t slots = config_.slots.size();

  auto encoder_widths = [&](std::size_t in) {
    std::vector<std::size_t> w{in};
    for (std::size_t i = 0; i < config_.encoder_layers; ++i) w.push_back(ne);
    return w;
  };
  query_encoder_ = Mlp::create(params_, "encoder.query", encoder_widths(config_.dim), rng);
  for (std::size_t l = 0; l < slots; ++l)
    input_encoders_.push_back(Mlp::create(params_, "encoder.slot" + std::to_string(l),
                                          encoder_widths(feature_width(config_.slots[l], config_.dim)),
                                          rng));

  auto make_cross = [&](const std::string& name) {
    CrossLayer c;
    c.norm = LayerNorm::create(params_, name + ".norm", ne);
    c.wq = Linear::create(params_, name + ".wq", ne, ne, false, rng);
    for (std::size_t l = 0; l < slots; ++l) {
      const std::string s = name + ".slot" + std::to_string(l);
      c.wk.push_back(Linear::create(params_, s + ".wk", ne, ne, false, rng));
      c.wv.push_back(Linear::create(params_, s + ".wv", ne, ne, false, rng));
    }
    return c;
  };
  auto make_self = [&](const std::string& name) {
    SelfLayer s;
    s.norm = LayerNorm::create(params_, name + ".norm", ne);
    s.wq = Linear::create(params_, name + ".wq", ne, ne, false, rng);
    s.wk = Linear::create(params_, name + ".wk", ne, ne, false, rng);
    s.wv = Linear::create(params_, name + ".wv", ne, ne, false, rng);
    return s;
  };
  auto make_moe = [&](const std::string& name) {
    MoeLayer m;
    m.norm = LayerNorm::create(params_, name + ".norm", ne);
    for (std::size_t k = 0; k < config_.experts; ++k)
      m.experts.experts.push_back(Mlp::create(params_, name + ".expert" + std::to_string(k),
                                              {ne, config_.ffn_hidden, ne}, rng));
    m.gate.mode = config_.gate;
    m.gate.experts = config_.experts;
    m.gate.handcrafted = config_.handcrafted;
    if (config_.gate == GateMode::Learned && config_.experts > 1) {
      m.gate.mlp = Mlp::create(params_, name + ".gate",
                               {config_.dim, config_.gate_hidden, config_.experts}, rng);
      const Linear& last = m.gate.mlp.layers.back();
      std::fill(params_[last.weight].values.begin(), params_[last.weight].values.end(), 0.0);
    }
    return m;
  };

  for (std::size_t b = 0; b < config_.layers; ++b) {
    const std::string base = "block" + std::to_string(b);
    GnotBlock block;
    const bool first_cross = config_.order != BlockOrder::SelfCross;
    const bool second_cross = config_.order != BlockOrder::CrossSelf;
    for (std::size_t i = 0; i < 2; ++i) {
      const std::string name = base + ".attn" + std::to_string(i);
      const bool cross = i == 0 ? first_cross : second_cross;
      if (cross) block.attention.emplace_back(make_cross(name));
      else block.attention.emplace_back(make_self(name));
      block.ffn.push_back(make_moe(base + ".ffn" + std::to_string(i)));
    }
    blocks_.push_back(std::move(block));
  }
  decoder_ = Mlp::create(params_, "decoder", {ne, ne, config_.out_dim}, rng);
  norms_ = ModelNormalizers::identity(config_);
}

void GnotModel::set_normalizers(ModelNormalizers norms) {
  if (norms.coords.channels() != config_.dim)
    throw ConfigError("dim: coordinate normalizer has " + std::to_string(norms.coords.channels()) +
                      " channels, model expects " + std::to_string(config_.dim));
  if (norms.targets.channels() != config_.out_dim)
    throw ConfigError("out_dim: target normalizer has " +
                      std::to_string(norms.targets.channels()) + " channels, model expects " +
                      std::to_string(config_.out_dim));
  if (norms.slots.size() != config_.slots.size())
    throw ConfigError("L: " + std::to_string(norms.slots.size()) +
                      " slot normalizers for a model with " + std::to_string(config_.slots.size()) +
                      " slots");
  for (std::size_t l = 0; l < norms.slots.size(); ++l)
    if (norms.slots[l].channels() != feature_width(config_.slots[l], config_.dim))
      throw ConfigError(slot_field(l, "channels") + ": normalizer width mismatch");
  norms_ = std::move(norms);
}

void GnotModel::check_input(const ModelInput& input) const {
  if (input.queries.cols != config_.dim)
    throw ConfigError("d: model expects " + std::to_string(config_.dim) +
                      "-dimensional query points, got " + std::to_string(input.queries.cols));
  if (input.queries.rows == 0) throw ConfigError("query_points: no query points");
  if (input.slot_rows.size() != config_.slots.size())
    throw ConfigError("L: model expects " + std::to_string(config_.slots.size()) +
                      " input slots, got " + std::to_string(input.slot_rows.size()));
  for (std::size_t l = 0; l < config_.slots.size(); ++l) {
    const std::size_t want = feature_width(config_.slots[l], config_.dim);
    if (input.slot_rows[l].cols != want)
      throw ConfigError(slot_field(l, "channels") + ": model expects feature width " +
                        std::to_string(want) + ", got " +
                        std::to_string(input.slot_rows[l].cols));
  }
}

Tensor GnotModel::forward(ParamView params, const ModelInput& input, attention::Form form) const {
  check_input(input);
  if (params.size() != params_.size())
    throw ContractError("forward: parameter view has " + std::to_string(params.size()) +
                        " tensors, model has " + std::to_string(params_.size()));
  const std::size_t n = input.queries.rows;
  QueryGeometry geo{norms_.coords.apply(input.queries), input.queries,
                    input.query_mask.valid.empty() ? attention::SeqMask::all(n) : input.query_mask};

  Tensor z = query_encoder_.forward(params, Tensor::constant(geo.coords_std));
  std::vector<ConditionalEmbedding> ys;
  ys.reserve(input_encoders_.size());
  for (std::size_t l = 0; l < input_encoders_.size(); ++l) {
    attention::SeqMask mask = l < input.slot_masks.size() ? input.slot_masks[l] : attention::SeqMask{};
    ys.push_back(encode_rows(input.slot_rows[l], std::move(mask), input_encoders_[l], params,
                             &norms_.slots[l]));
  }

  for (const GnotBlock& block : blocks_) {
    for (std::size_t i = 0; i < block.attention.size(); ++i) {
      z = std::visit(Overloaded{
                         [&](const CrossLayer& c) {
                           return add(z, hna_cross(params, c, c.norm.forward(params, z), ys,
                                                   config_.heads, form));
                         },
                         [&](const SelfLayer& s) {
                           return self_attention_update(params, s, z, geo.mask, config_.heads, form);
                         }},
                     block.attention[i]);
      z = moe_ffn_update(params, block.ffn[i], z, geo);
    }
  }
  return decoder_.forward(params, z);
}

Tensor GnotModel::forward(const Sample& sample) const {
  if (sample.inputs.size() != config_.slots.size())
    throw ConfigError("L: model expects " + std::to_string(config_.slots.size()) +
                      " input slots, got " + std::to_string(sample.inputs.size()));
  for (std::size_t l = 0; l < sample.inputs.size(); ++l)
    if (kind_of(sample.inputs[l]) != config_.slots[l].kind)
      throw ConfigError(slot_field(l, "kind") + ": model expects '" +
                        std::string(kind_name(config_.slots[l].kind)) + "', got '" +
                        std::string(kind_name(kind_of(sample.inputs[l]))) + "'");
  if (!sample.targets.empty() && sample.targets.cols != config_.out_dim)
    throw ConfigError("out_dim: model predicts " + std::to_string(config_.out_dim) +
                      " channels, sample has " + std::to_string(sample.targets.cols));
  const auto bound = params_.bind(false);
  return forward(bound, ModelInput::from_sample(sample));
}

Matrix GnotModel::predict(const Sample& sample) const {
  return norms_.targets.invert(forward(sample).to_matrix());
}

}  // namespace gnot
