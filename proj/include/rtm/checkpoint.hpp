#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rtm/config.hpp"
#include "rtm/imle.hpp"
#include "rtm/tensor.hpp"

// Binary checkpoint format, little-endian throughout:
//
//   magic "RTMI" | u32 version | 32-byte config digest | u64 step
//   | u32 rng-tag length | tag bytes | u32 rng-state length | state bytes
//   | u32 tensor count
//   | per tensor: u32 name length | name | u32 ndim | u32 dims[]
//                 | u64 payload bytes | float32 values
//
// Every persisted value is float32-exact by construction (parameters,
// moments, EMA, matched latents/distances are rounded to float32 whenever
// they change), so save -> load round-trips bit-identically.

namespace rtm {

constexpr uint32_t kCheckpointVersion = 1;
inline constexpr const char* kRngTag = "splitmix64-counter";

struct NamedTensorData {
  std::string name;
  Shape shape;
  std::vector<double> values;  // float32-exact
};

struct CheckpointData {
  Digest digest{};
  uint64_t step = 0;
  std::string rng_tag = kRngTag;
  uint64_t seed = 0;
  std::vector<NamedTensorData> tensors;
};

void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

// TrainState <-> checkpoint. Tensors are stored as param/<name>,
// adam_m/<name>, adam_v/<name>, ema/<name> plus trainer/matched_latents,
// trainer/matched_distance and trainer/accepted_count, so training resumes
// exactly from any step, refresh boundary or not (the pool itself is never
// stored; it is regenerated at the next refresh).
CheckpointData pack_train_state(const ExperimentConfig& cfg, const TrainState& state);

// Throws CheckpointError{digest_mismatch} when `data` was written under a
// different config, and CheckpointError{format} on missing/misshaped tensors.
TrainState unpack_train_state(const ExperimentConfig& cfg, const CheckpointData& data);

}  // namespace rtm
