// SPDX-License-Identifier: Apache-2.0
#include "gnot/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "gnot/errors.hpp"

namespace gnot {

namespace {

constexpr char kMagic[8] = {'G', 'N', 'O', 'T', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u8(std::uint8_t x) { buf_.push_back(x); }
  void u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void u64(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
  void f64s(const std::vector<double>& xs) {
    u64(xs.size());
    for (double x : xs) f64(x);
  }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : p_(data), end_(data + size) {}

  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end_ - p_) < n) throw CheckpointError("checkpoint is truncated");
  }
  std::uint8_t u8() {
    need(1);
    return *p_++;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(*p_++) << (8 * i);
    return x;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(*p_++) << (8 * i);
    return x;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> f64s() {
    const std::uint64_t n = u64();
    need(n * 8);
    std::vector<double> xs(n);
    for (double& x : xs) x = f64();
    return xs;
  }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(p_), n);
    p_ += n;
    return s;
  }
  bool done() const { return p_ == end_; }

 private:
  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void write_normalizer(Writer& w, const Normalizer& n) {
  w.u64(n.channels());
  for (double x : n.mean()) w.f64(x);
  for (double x : n.stddev()) w.f64(x);
}

Normalizer read_normalizer(Reader& r) {
  const std::uint64_t c = r.u64();
  r.need(c * 16);
  std::vector<double> mean(c), sd(c);
  for (double& x : mean) x = r.f64();
  for (double& x : sd) x = r.f64();
  return Normalizer(std::move(mean), std::move(sd));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const GnotModel& model, const TrainState* state) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.str(model.config().serialize());

  const auto& entries = model.params().entries();
  w.u64(entries.size());
  for (const auto& e : entries) {
    w.str(e.name);
    w.u32(static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t d : e.shape) w.u64(d);
    for (double x : e.values) w.f64(x);
  }

  const ModelNormalizers& norms = model.normalizers();
  w.u32(static_cast<std::uint32_t>(norms.slots.size() + 2));
  write_normalizer(w, norms.coords);
  for (const Normalizer& n : norms.slots) write_normalizer(w, n);
  write_normalizer(w, norms.targets);

  w.u8(state ? 1 : 0);
  if (state) {
    w.u64(state->optimizer.step);
    w.u64(state->epoch);
    w.f64(state->best_metric);
    w.u64(state->best_epoch);
    w.u64(state->seed);
    if (state->optimizer.m.size() != entries.size() || state->optimizer.v.size() != entries.size())
      throw ContractError("checkpoint: optimizer moments do not match the parameter list");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      w.f64s(state->optimizer.m[i]);
      w.f64s(state->optimizer.v[i]);
    }
    w.u64(state->history.size());
    for (const EpochRecord& rec : state->history) {
      w.u64(rec.epoch);
      w.f64(rec.train_loss);
      w.f64(rec.val_epsilon);
      w.f64(rec.lr);
      w.u64(rec.rejected_steps);
    }
  }
  auto& buf = w.buffer();
  w.u32(crc32_of(buf.data(), buf.size()));
  return std::move(buf);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof kMagic + 8) throw CheckpointError("checkpoint is truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError("not a checkpoint file (bad magic)");
  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes.data() + body, 4);
  if (tail.u32() != crc32_of(bytes.data(), body))
    throw CheckpointError("checkpoint checksum mismatch (file is corrupted)");

  Reader r(bytes.data() + sizeof kMagic, body - sizeof kMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError("incompatible checkpoint version " + std::to_string(version) +
                          " (this build reads version " + std::to_string(kCheckpointVersion) + ")");
  Checkpoint ck;
  try {
    ck.config = ModelConfig::parse(r.str());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }

  const std::uint64_t n_params = r.u64();
  for (std::uint64_t i = 0; i < n_params; ++i) {
    ParamStore::Entry e;
    e.name = r.str();
    const std::uint32_t rank = r.u32();
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      e.shape.push_back(r.u64());
      numel *= e.shape.back();
    }
    r.need(numel * 8);
    e.values.resize(numel);
    for (double& x : e.values) x = r.f64();
    ck.params.push_back(std::move(e));
  }

  const std::uint32_t n_norms = r.u32();
  if (n_norms < 2) throw CheckpointError("checkpoint normalizer block is malformed");
  ck.normalizers.coords = read_normalizer(r);
  for (std::uint32_t i = 0; i + 2 < n_norms; ++i) ck.normalizers.slots.push_back(read_normalizer(r));
  ck.normalizers.targets = read_normalizer(r);

  if (r.u8()) {
    TrainState s;
    s.optimizer.step = r.u64();
    s.epoch = r.u64();
    s.best_metric = r.f64();
    s.best_epoch = r.u64();
    s.seed = r.u64();
    for (std::uint64_t i = 0; i < n_params; ++i) {
      s.optimizer.m.push_back(r.f64s());
      s.optimizer.v.push_back(r.f64s());
    }
    const std::uint64_t n_hist = r.u64();
    for (std::uint64_t i = 0; i < n_hist; ++i) {
      EpochRecord rec;
      rec.epoch = r.u64();
      rec.train_loss = r.f64();
      rec.val_epsilon = r.f64();
      rec.lr = r.f64();
      rec.rejected_steps = r.u64();
      s.history.push_back(rec);
    }
    ck.state = std::move(s);
  }
  if (!r.done()) throw CheckpointError("checkpoint has trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const GnotModel& model,
                     const TrainState* state) {
  const auto bytes = encode_checkpoint(model, state);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

std::optional<std::string> config_difference(const ModelConfig& a, const ModelConfig& b) {
  if (a.dim != b.dim) return "dim";
  if (a.out_dim != b.out_dim) return "out_dim";
  if (a.slots.size() != b.slots.size()) return "L";
  for (std::size_t l = 0; l < a.slots.size(); ++l) {
    if (a.slots[l].kind != b.slots[l].kind) return "slots[" + std::to_string(l) + "].kind";
    if (a.slots[l].channels != b.slots[l].channels)
      return "slots[" + std::to_string(l) + "].channels";
  }
  if (a.embed != b.embed) return "embed";
  if (a.heads != b.heads) return "heads";
  if (a.experts != b.experts) return "experts";
  if (a.layers != b.layers) return "layers";
  if (a.encoder_layers != b.encoder_layers) return "encoder_layers";
  if (a.ffn_hidden != b.ffn_hidden) return "ffn_hidden";
  if (a.gate_hidden != b.gate_hidden) return "gate_hidden";
  if (a.order != b.order) return "order";
  if (a.gate != b.gate) return "gate";
  if (a.handcrafted.axis != b.handcrafted.axis) return "gate_axis";
  if (a.handcrafted.thresholds != b.handcrafted.thresholds) return "gate_thresholds";
  if (a.seed != b.seed) return "seed";
  return std::nullopt;
}

GnotModel restore_model(const Checkpoint& ckpt) {
  GnotModel model(ckpt.config);
  restore_into(model, ckpt);
  return model;
}

void restore_into(GnotModel& model, const Checkpoint& ckpt) {
  if (auto field = config_difference(model.config(), ckpt.config))
    throw CheckpointError("checkpoint config mismatch in field '" + *field + "'");
  ParamStore& store = model.params();
  if (store.size() != ckpt.params.size())
    throw CheckpointError("checkpoint holds " + std::to_string(ckpt.params.size()) +
                          " parameters, model has " + std::to_string(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& src = ckpt.params[i];
    if (src.name != store[i].name || src.shape != store[i].shape)
      throw CheckpointError("checkpoint parameter '" + src.name + "' " + shape_string(src.shape) +
                            " does not match model parameter '" + store[i].name + "' " +
                            shape_string(store[i].shape));
  }
  try {
    model.set_normalizers(ckpt.normalizers);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint normalizers: ") + e.what());
  }
  for (std::size_t i = 0; i < store.size(); ++i) store[i].values = ckpt.params[i].values;
}

}  // namespace gnot
