// SPDX-License-Identifier: Apache-2.0
//
// Single-file checkpoint container, little-endian throughout:
//
//   magic "GNOTCKPT" | u32 version
//   u64 length | model config text
//   u64 count  | per parameter: u64 name length, name, u32 rank,
//                u64 extents[rank], f64 values
//   u32 count  | per normalizer (coords, slots..., targets):
//                u64 channels, f64 mean[], f64 std[]
//   u8 has_state | state: u64 step, u64 epoch, f64 best, u64 best_epoch,
//                u64 seed, per parameter f64 m[] and f64 v[],
//                u64 history length, per record u64 epoch, f64 loss,
//                f64 val_epsilon, f64 lr, u64 rejected
//   u32 crc32 of every preceding byte
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gnot/model.hpp"
#include "gnot/training.hpp"

namespace gnot {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  std::vector<ParamStore::Entry> params;
  ModelNormalizers normalizers;
  std::optional<TrainState> state;
};

std::vector<std::uint8_t> encode_checkpoint(const GnotModel& model, const TrainState* state);
/// Verifies the checksum before decoding anything.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Written to a temporary file and renamed, so a crash never leaves a
/// truncated checkpoint behind.
void save_checkpoint(const std::filesystem::path& path, const GnotModel& model,
                     const TrainState* state = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Name of the first differing field, if any.
std::optional<std::string> config_difference(const ModelConfig& a, const ModelConfig& b);

/// Builds a model from the checkpoint's own configuration.
GnotModel restore_model(const Checkpoint& ckpt);
/// Copies parameters and normalizers into an existing model. Throws
/// CheckpointError naming the first mismatching config field.
void restore_into(GnotModel& model, const Checkpoint& ckpt);

}  // namespace gnot
