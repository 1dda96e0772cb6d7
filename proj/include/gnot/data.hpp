// SPDX-License-Identifier: Apache-2.0
//
// Operator-learning samples, the line-delimited dataset format, and padded
// batching.
//
// Dataset file: UTF-8, one JSON record per line.
//   line 1:  {"version":1,"d":D,"out_dim":C,"L":L,
//             "slots":[{"kind":"distributed","channels":c},...]}
//   line k:  {"query_points":[[..],..],"targets":[[..],..],"inputs":[{...},..]}
// Input records by kind:
//   {"kind":"param","values":[..]}
//   {"kind":"boundary","points":[[..],..]}
//   {"kind":"distributed","points":[[..],..],"values":[[..],..]}
//   {"kind":"extra","points":[[..],..],"features":[[..],..]}
//   {"kind":"edges","src":[[..],..],"dst":[[..],..],"feat":[[..],..]}
// Floats are written in shortest round-trip form.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "gnot/attention.hpp"
#include "gnot/inputs.hpp"
#include "gnot/matrix.hpp"

namespace gnot {

inline constexpr int kDatasetFormatVersion = 1;

/// One example: solution values at query points plus L input functions.
struct Sample {
  Matrix query_points;  // [N', d]
  Matrix targets;       // [N', out_dim]
  std::vector<InputFunction> inputs;
};

struct DatasetHeader {
  int version = kDatasetFormatVersion;
  std::size_t dim = 1;
  std::size_t out_dim = 1;
  std::vector<SlotSpec> slots;

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Sample> samples;
};

/// Throws ContractError if the sample violates the header's shape contract.
void validate_sample(const Sample& sample, const DatasetHeader& header);

void save_dataset(const Dataset& data, const std::filesystem::path& path);
void write_dataset(const Dataset& data, std::ostream& out);
/// Throws ParseError naming the line (and field) of the first violation.
Dataset load_dataset(const std::filesystem::path& path);
Dataset read_dataset(std::istream& in);

/// Flattened model input for one sample, optionally padded.
struct ModelInput {
  Matrix queries;  // raw coordinates [N, d]
  attention::SeqMask query_mask;
  std::vector<Matrix> slot_rows;  // raw feature rows per slot
  std::vector<attention::SeqMask> slot_masks;

  static ModelInput from_sample(const Sample& sample);
};

/// Samples padded to the per-batch maximum lengths. Padded rows are zero and
/// masked out; they never reach a loss or metric.
struct Batch {
  std::vector<std::size_t> indices;  // positions in the source sample list
  std::vector<ModelInput> inputs;
  std::vector<Matrix> targets;  // [N'_max, out_dim] per element, zero padded

  std::size_t size() const { return indices.size(); }
};

/// Shuffles with `shuffle_seed` when given (deterministic per seed), else
/// keeps the input order.
std::vector<Batch> make_batches(const std::vector<Sample>& samples, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed);
/// Pads the selected samples into one batch.
Batch make_batch(const std::vector<Sample>& samples, std::span<const std::size_t> indices);

/// Deterministic train/validation split by seed; `fraction` goes to validation.
struct Split {
  std::vector<Sample> train;
  std::vector<Sample> validation;
};
Split split_dataset(const std::vector<Sample>& samples, double fraction, std::uint64_t seed);

}  // namespace gnot
