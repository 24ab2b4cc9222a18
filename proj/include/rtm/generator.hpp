#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rtm/decoder.hpp"
#include "rtm/mapper.hpp"
#include "rtm/matrix.hpp"
#include "rtm/tensor.hpp"

// A generator is one mapper (recursive token mapper or baseline MLP) feeding
// one decoder (point or micro-image): z -> w -> sample, one pass.

namespace rtm {

enum class MapperKind { rtm, baseline_mlp };
enum class DecoderKind { point, micro_image };

struct GeneratorConfig {
  MapperKind mapper = MapperKind::rtm;
  RtmConfig rtm;
  BaselineMlpConfig mlp;
  DecoderKind decoder = DecoderKind::point;
  PointDecoderConfig point;
  MicroImageDecoderConfig micro;

  int64_t latent_dim() const { return mapper == MapperKind::rtm ? rtm.d : mlp.d; }
  Shape sample_shape() const;
  int64_t sample_dim() const { return shape_numel(sample_shape()); }
  void validate() const;  // also checks mapper/decoder width agreement
};

struct GeneratorParams {
  std::optional<RtmParams> rtm;
  std::optional<MlpParams> mlp;
  std::optional<PointDecoderParams> point;
  std::optional<MicroImageDecoderParams> micro;
};

GeneratorParams init_generator(const GeneratorConfig& cfg, uint64_t seed);

// Stable (name, tensor-handle) enumeration of every trainable parameter;
// handles share storage with `params`, so in-place updates are visible.
using ParamRegistry = std::vector<std::pair<std::string, Tensor>>;
ParamRegistry collect_params(const GeneratorConfig& cfg, GeneratorParams& params);

int64_t parameter_count(const GeneratorConfig& cfg);
// Sequential stages per mapper forward: H*(L+1) shared-block applications
// for the recursive mapper, layer count for the baseline MLP.
int64_t mapper_sequential_depth(const GeneratorConfig& cfg);

// Structural deep copy (EMA shadow, snapshots).
GeneratorParams clone_params(const GeneratorConfig& cfg, const GeneratorParams& params);

struct GenerateResult {
  Tensor sample;
  int64_t block_evals = 0;
};

GenerateResult generate_one(const Tensor& z, const GeneratorConfig& cfg,
                            const GeneratorParams& params, std::optional<int64_t> h_override = {},
                            GradScope scope = GradScope::final_step_only);

// Gradient-free decode of one latent row per output row; rows are
// independent, so the loop is OpenMP-parallel with disjoint writes.
Matrix batch_generate(const Matrix& latents, const GeneratorConfig& cfg,
                      const GeneratorParams& params, std::optional<int64_t> h_override = {});

}  // namespace rtm
