// SPDX-License-Identifier: Apache-2.0
#include "gnot/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "gnot/errors.hpp"

namespace gnot {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows; ++i) {
    auto r = m.row(i);
    rows.push_back(json(std::vector<double>(r.begin(), r.end())));
  }
  return rows;
}

const json& field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end()) throw ContractError(std::string("missing field '") + name + "'");
  return *it;
}

Matrix matrix_from(const json& j, const char* name) {
  if (!j.is_array()) throw ContractError(std::string(name) + ": expected an array of rows");
  Matrix m;
  m.rows = j.size();
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& row = j[i];
    if (!row.is_array())
      throw ContractError(std::string(name) + "[" + std::to_string(i) + "]: expected an array");
    if (i == 0) m.cols = row.size();
    if (row.size() != m.cols)
      throw ContractError(std::string(name) + "[" + std::to_string(i) + "]: ragged row of width " +
                          std::to_string(row.size()) + ", expected " + std::to_string(m.cols));
    for (const json& x : row) {
      if (!x.is_number())
        throw ContractError(std::string(name) + "[" + std::to_string(i) + "]: non-numeric entry");
      m.data.push_back(x.get<double>());
    }
  }
  return m;
}

json input_json(const InputFunction& input) {
  return std::visit(
      Overloaded{
          [](const ParamVector& p) { return json{{"kind", "param"}, {"values", p.values}}; },
          [](const BoundaryShape& b) {
            return json{{"kind", "boundary"}, {"points", matrix_json(b.points)}};
          },
          [](const DistributedFunction& f) {
            return json{{"kind", "distributed"},
                        {"points", matrix_json(f.points)},
                        {"values", matrix_json(f.values)}};
          },
          [](const ExtraFeatures& f) {
            return json{{"kind", "extra"},
                        {"points", matrix_json(f.points)},
                        {"features", matrix_json(f.features)}};
          },
          [](const Edges& e) {
            return json{{"kind", "edges"},
                        {"src", matrix_json(e.src)},
                        {"dst", matrix_json(e.dst)},
                        {"feat", matrix_json(e.features)}};
          }},
      input);
}

InputFunction input_from(const json& j) {
  if (!j.is_object()) throw ContractError("inputs: expected an object per input");
  const json& kind = field(j, "kind");
  if (!kind.is_string()) throw ContractError("kind: expected a string");
  InputKind k;
  try {
    k = parse_kind(kind.get<std::string>());
  } catch (const ConfigError& e) {
    throw ContractError(std::string("kind: ") + e.what());
  }
  switch (k) {
    case InputKind::ParamVector: {
      const json& v = field(j, "values");
      if (!v.is_array()) throw ContractError("values: expected an array");
      ParamVector p;
      for (const json& x : v) {
        if (!x.is_number()) throw ContractError("values: non-numeric entry");
        p.values.push_back(x.get<double>());
      }
      return p;
    }
    case InputKind::BoundaryShape: return BoundaryShape{matrix_from(field(j, "points"), "points")};
    case InputKind::DistributedFunction:
      return DistributedFunction{matrix_from(field(j, "points"), "points"),
                                 matrix_from(field(j, "values"), "values")};
    case InputKind::ExtraFeatures:
      return ExtraFeatures{matrix_from(field(j, "points"), "points"),
                           matrix_from(field(j, "features"), "features")};
    case InputKind::Edges:
      return Edges{matrix_from(field(j, "src"), "src"), matrix_from(field(j, "dst"), "dst"),
                   matrix_from(field(j, "feat"), "feat")};
  }
  throw ContractError("kind: unsupported");
}

DatasetHeader header_from(const json& j) {
  if (!j.is_object()) throw ContractError("header: expected an object");
  DatasetHeader h;
  h.version = field(j, "version").get<int>();
  if (h.version != kDatasetFormatVersion)
    throw ContractError("version: unsupported dataset format version " + std::to_string(h.version));
  h.dim = field(j, "d").get<std::size_t>();
  h.out_dim = field(j, "out_dim").get<std::size_t>();
  const auto l = field(j, "L").get<std::size_t>();
  const json& slots = field(j, "slots");
  if (!slots.is_array()) throw ContractError("slots: expected an array");
  for (const json& s : slots) {
    SlotSpec spec;
    try {
      spec.kind = parse_kind(field(s, "kind").get<std::string>());
    } catch (const ConfigError& e) {
      throw ContractError(std::string("slots: ") + e.what());
    }
    spec.channels = field(s, "channels").get<std::size_t>();
    h.slots.push_back(spec);
  }
  if (h.slots.size() != l)
    throw ContractError("L: header declares " + std::to_string(l) + " slots but lists " +
                        std::to_string(h.slots.size()));
  if (h.dim == 0) throw ContractError("d: must be at least 1");
  if (h.out_dim == 0) throw ContractError("out_dim: must be at least 1");
  return h;
}

Sample sample_from(const json& j) {
  if (!j.is_object()) throw ContractError("sample: expected an object");
  Sample s;
  s.query_points = matrix_from(field(j, "query_points"), "query_points");
  s.targets = matrix_from(field(j, "targets"), "targets");
  const json& inputs = field(j, "inputs");
  if (!inputs.is_array()) throw ContractError("inputs: expected an array");
  for (const json& in : inputs) s.inputs.push_back(input_from(in));
  return s;
}

}  // namespace

void validate_sample(const Sample& sample, const DatasetHeader& header) {
  const auto n = sample.query_points.rows;
  if (n == 0) throw ContractError("query_points: a sample needs at least one query point");
  if (sample.query_points.cols != header.dim)
    throw ContractError("d: query_points have width " + std::to_string(sample.query_points.cols) +
                        ", header declares " + std::to_string(header.dim));
  if (sample.targets.rows != n)
    throw ContractError("targets: " + std::to_string(sample.targets.rows) + " rows for " +
                        std::to_string(n) + " query points");
  if (sample.targets.cols != header.out_dim)
    throw ContractError("out_dim: targets have width " + std::to_string(sample.targets.cols) +
                        ", header declares " + std::to_string(header.out_dim));
  for (double x : sample.query_points.data)
    if (!std::isfinite(x)) throw ContractError("query_points: non-finite value");
  for (double x : sample.targets.data)
    if (!std::isfinite(x)) throw ContractError("targets: non-finite value");
  if (sample.inputs.size() != header.slots.size())
    throw ContractError("L: sample has " + std::to_string(sample.inputs.size()) +
                        " inputs, header declares " + std::to_string(header.slots.size()));
  for (std::size_t l = 0; l < sample.inputs.size(); ++l) {
    const std::string where = "inputs[" + std::to_string(l) + "]";
    if (kind_of(sample.inputs[l]) != header.slots[l].kind)
      throw ContractError(where + ".kind: expected '" +
                          std::string(kind_name(header.slots[l].kind)) + "', got '" +
                          std::string(kind_name(kind_of(sample.inputs[l]))) + "'");
    try {
      validate_input(sample.inputs[l], header.slots[l], header.dim);
    } catch (const ContractError& e) {
      throw ContractError(where + "." + e.what());
    }
  }
}

void write_dataset(const Dataset& data, std::ostream& out) {
  json slots = json::array();
  for (const SlotSpec& s : data.header.slots)
    slots.push_back({{"kind", kind_name(s.kind)}, {"channels", s.channels}});
  const json header{{"version", data.header.version},
                    {"d", data.header.dim},
                    {"out_dim", data.header.out_dim},
                    {"L", data.header.slots.size()},
                    {"slots", slots}};
  out << header.dump() << '\n';
  for (const Sample& s : data.samples) {
    json inputs = json::array();
    for (const InputFunction& in : s.inputs) inputs.push_back(input_json(in));
    const json rec{{"query_points", matrix_json(s.query_points)},
                   {"targets", matrix_json(s.targets)},
                   {"inputs", inputs}};
    out << rec.dump() << '\n';
  }
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_dataset(data, out);
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

Dataset read_dataset(std::istream& in) {
  Dataset data;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        data.header = header_from(j);
        have_header = true;
        continue;
      }
      Sample s = sample_from(j);
      validate_sample(s, data.header);
      data.samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError(lineno, e.what());
    } catch (const ContractError& e) {
      throw ParseError(lineno, e.what());
    } catch (const ConfigError& e) {
      throw ParseError(lineno, e.what());
    }
  }
  if (data.samples.empty()) throw ParseError(lineno + 1, "no samples");
  return data;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset(in);
}

ModelInput ModelInput::from_sample(const Sample& sample) {
  ModelInput m;
  m.queries = sample.query_points;
  m.query_mask = attention::SeqMask::all(sample.query_points.rows);
  for (const InputFunction& in : sample.inputs) {
    m.slot_rows.push_back(feature_rows(in));
    m.slot_masks.push_back(attention::SeqMask::all(m.slot_rows.back().rows));
  }
  return m;
}

namespace {

Matrix pad_rows(const Matrix& m, std::size_t rows) {
  Matrix out(rows, m.cols);
  std::copy(m.data.begin(), m.data.end(), out.data.begin());
  return out;
}

attention::SeqMask prefix_mask(std::size_t valid, std::size_t total) {
  attention::SeqMask mask{std::vector<std::uint8_t>(total, 0)};
  std::fill(mask.valid.begin(), mask.valid.begin() + static_cast<std::ptrdiff_t>(valid), 1);
  return mask;
}

}  // namespace

Batch make_batch(const std::vector<Sample>& samples, std::span<const std::size_t> indices) {
  Batch batch;
  if (indices.empty()) return batch;
  std::vector<ModelInput> raw;
  std::size_t max_n = 0;
  std::vector<std::size_t> max_slot;
  for (std::size_t idx : indices) {
    raw.push_back(ModelInput::from_sample(samples.at(idx)));
    max_n = std::max(max_n, raw.back().queries.rows);
    max_slot.resize(raw.back().slot_rows.size(), 0);
    for (std::size_t l = 0; l < raw.back().slot_rows.size(); ++l)
      max_slot[l] = std::max(max_slot[l], raw.back().slot_rows[l].rows);
  }
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const ModelInput& r = raw[b];
    ModelInput in;
    in.queries = pad_rows(r.queries, max_n);
    in.query_mask = prefix_mask(r.queries.rows, max_n);
    for (std::size_t l = 0; l < r.slot_rows.size(); ++l) {
      in.slot_rows.push_back(pad_rows(r.slot_rows[l], max_slot[l]));
      in.slot_masks.push_back(prefix_mask(r.slot_rows[l].rows, max_slot[l]));
    }
    batch.indices.push_back(indices[b]);
    batch.inputs.push_back(std::move(in));
    batch.targets.push_back(pad_rows(samples[indices[b]].targets, max_n));
  }
  return batch;
}

std::vector<Batch> make_batches(const std::vector<Sample>& samples, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size == 0) throw ContractError("make_batches: batch_size must be at least 1");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    out.push_back(make_batch(samples, std::span(order).subspan(start, end - start)));
  }
  return out;
}

Split split_dataset(const std::vector<Sample>& samples, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw ConfigError("validation fraction must lie in [0, 1)");
  const std::size_t n = samples.size();
  std::size_t n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (fraction > 0.0 && n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  Split s;
  for (std::size_t i : train) s.train.push_back(samples[i]);
  for (std::size_t i : val) s.validation.push_back(samples[i]);
  return s;
}

}  // namespace gnot
