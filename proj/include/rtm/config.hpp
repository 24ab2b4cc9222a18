#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "rtm/data.hpp"
#include "rtm/generator.hpp"
#include "rtm/imle.hpp"

#include <json.hpp>

// Experiment configuration: JSON in, validated structs out. Parsing is
// strict — unknown keys and type mismatches raise ConfigError naming the
// full field path (e.g. "imle.refresh_period"). The canonical serialization
// (sorted keys, every field explicit) feeds a SHA-256 digest that names run
// directories and pins checkpoints to their config.

namespace rtm {

struct MetricsConfig {
  int64_t k = 3;
  int64_t n_fake = 1024;
  void validate() const;
};

struct ExperimentConfig {
  uint64_t seed = 1;
  DatasetSpec dataset;
  GeneratorConfig generator;
  ImleHyper imle;
  MetricsConfig metrics;

  // Whole-config consistency on top of the per-section checks: the decoder's
  // output must match the dataset's sample shape, and the decoder's style
  // width must match the mapper's output width.
  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// Every field explicit, kinds as strings, resolved "auto" markers kept
// symbolic. Round-trips through config_from_json.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

std::string canonical_config_string(const ExperimentConfig& cfg);

using Digest = std::array<uint8_t, 32>;
Digest config_digest(const ExperimentConfig& cfg);
std::string digest_hex(const Digest& d, size_t bytes = 32);

}  // namespace rtm
