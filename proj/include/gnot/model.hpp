// SPDX-License-Identifier: Apache-2.0
//
// The neural operator transformer.
//
//   X   = query_encoder(y)                     pointwise over query points
//   Y_l = slot_encoder_l(input_l)              one MLP per input slot
//   N blocks, each two (attention, gated FFN) pairs; the default wiring is
//     Z = X + hna_cross(LN(X), {Y_l})
//     Z = Z + sum_k p_k(x) E_k(LN(Z))          geometric gate on coordinates
//     Z = Z + self_attention(LN(Z))
//     Z = Z + sum_k p_k(x) E_k(LN(Z))
//   out = decoder(Z)                           pointwise, standardized units
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gnot/attention.hpp"
#include "gnot/data.hpp"
#include "gnot/encoding.hpp"
#include "gnot/nn.hpp"
#include "gnot/normalizer.hpp"

namespace gnot {

enum class BlockOrder { CrossSelf, SelfCross, CrossCross };
std::string_view block_order_name(BlockOrder order);  // "cross+self", ...
BlockOrder parse_block_order(std::string_view name);

/// Learned: softmax over an MLP of the coordinates. Handcrafted: fixed
/// one-hot by subdomain. None: plain FFN, single expert, no gate parameters.
enum class GateMode { Learned, Handcrafted, None };
std::string_view gate_mode_name(GateMode mode);
GateMode parse_gate_mode(std::string_view name);

/// Subdomains are the intervals cut by sorted `thresholds` along one axis of
/// the raw query coordinates; expert k owns interval k.
struct HandcraftedGate {
  std::size_t axis = 0;
  std::vector<double> thresholds;

  std::size_t expert_for(std::span<const double> point) const;
  friend bool operator==(const HandcraftedGate&, const HandcraftedGate&) = default;
};

struct ModelConfig {
  std::size_t dim = 1;
  std::size_t out_dim = 1;
  std::vector<SlotSpec> slots;
  std::size_t embed = 64;
  std::size_t heads = 4;
  std::size_t experts = 1;
  std::size_t layers = 3;
  std::size_t encoder_layers = 3;
  std::size_t ffn_hidden = 64;
  std::size_t gate_hidden = 32;
  BlockOrder order = BlockOrder::CrossSelf;
  GateMode gate = GateMode::Learned;
  HandcraftedGate handcrafted;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// One `key=value` per line; parse() inverts it exactly.
  std::string serialize() const;
  static ModelConfig parse(std::string_view text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct GateNetwork {
  GateMode mode = GateMode::Learned;
  std::size_t experts = 1;
  Mlp mlp;  // coordinates -> K scores; empty unless learned with K > 1
  HandcraftedGate handcrafted;

  /// Mixture weights [N, K] for the given query coordinates.
  Tensor weights(ParamView p, const Matrix& coords_std, const Matrix& coords_raw) const;
};

struct ExpertSet {
  std::vector<Mlp> experts;
};

struct MoeLayer {
  LayerNorm norm;
  ExpertSet experts;
  GateNetwork gate;
};

/// Heterogeneous cross-attention: one query projection, one (W_k, W_v) pair
/// per input slot.
struct CrossLayer {
  LayerNorm norm;
  Linear wq;
  std::vector<Linear> wk;
  std::vector<Linear> wv;
};

struct SelfLayer {
  LayerNorm norm;
  Linear wq;
  Linear wk;
  Linear wv;
};

using AttentionLayer = std::variant<CrossLayer, SelfLayer>;

/// attention[i] is followed by ffn[i].
struct GnotBlock {
  std::vector<AttentionLayer> attention;
  std::vector<MoeLayer> ffn;

  std::size_t cross_count() const;
  std::size_t self_count() const;
};

/// Geometry of the query points as seen by gates and masks.
struct QueryGeometry {
  Matrix coords_std;
  Matrix coords_raw;
  attention::SeqMask mask;
};

/// z_t = q~_t + (1/L) sum_l alpha_t^l q~_t . (sum_i k~_i (x) v_i), per head.
/// `x` is the (pre-normalized) query embedding.
Tensor hna_cross(ParamView p, const CrossLayer& layer, const Tensor& x,
                 std::span<const ConditionalEmbedding> inputs, std::size_t heads,
                 attention::Form form = attention::Form::Factored);

/// Z + NormAttn(LN(Z)) with keys restricted to valid query positions.
Tensor self_attention_update(ParamView p, const SelfLayer& layer, const Tensor& z,
                             const attention::SeqMask& mask, std::size_t heads,
                             attention::Form form = attention::Form::Factored);

/// Z + sum_k p_k(x) E_k(LN(Z)).
Tensor moe_ffn_update(ParamView p, const MoeLayer& layer, const Tensor& z,
                      const QueryGeometry& geometry);

/// Mixture weights of a single point.
std::vector<double> gate_weights(ParamView p, const GateNetwork& gate,
                                 std::span<const double> coords_std,
                                 std::span<const double> coords_raw);

struct ModelNormalizers {
  Normalizer coords;
  std::vector<Normalizer> slots;
  Normalizer targets;

  static ModelNormalizers identity(const ModelConfig& config);
  friend bool operator==(const ModelNormalizers&, const ModelNormalizers&) = default;
};

/// Statistics of query coordinates, slot feature rows and targets.
ModelNormalizers fit_normalizers(const std::vector<Sample>& train, const ModelConfig& config);

class GnotModel {
 public:
  explicit GnotModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }
  const ModelNormalizers& normalizers() const { return norms_; }
  void set_normalizers(ModelNormalizers norms);

  const Mlp& query_encoder() const { return query_encoder_; }
  const std::vector<Mlp>& input_encoders() const { return input_encoders_; }
  const std::vector<GnotBlock>& blocks() const { return blocks_; }
  const Mlp& decoder() const { return decoder_; }

  /// Predictions [N, out_dim] in standardized target units. Rows of padded
  /// query positions are unspecified.
  Tensor forward(ParamView params, const ModelInput& input,
                 attention::Form form = attention::Form::Factored) const;
  /// Evaluation-mode forward; allocates no gradient state.
  Tensor forward(const Sample& sample) const;
  /// Predictions in original target units.
  Matrix predict(const Sample& sample) const;

  /// Throws ConfigError naming the first field of `input` that disagrees
  /// with the configuration.
  void check_input(const ModelInput& input) const;

 private:
  ModelConfig config_;
  ParamStore params_;
  ModelNormalizers norms_;
  Mlp query_encoder_;
  std::vector<Mlp> input_encoders_;
  std::vector<GnotBlock> blocks_;
  Mlp decoder_;
};

}  // namespace gnot
