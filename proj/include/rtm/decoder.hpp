#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rtm/mapper.hpp"
#include "rtm/tensor.hpp"

// Style-conditioned decoders: the style vector w never enters through the
// data path, only through per-layer adaptive instance normalization (scale
// and shift derived from w by a learned affine map). The data path starts
// from a learned constant.

namespace rtm {

struct PointDecoderConfig {
  int64_t style_dim = 32;
  int64_t hidden = 32;
  int64_t layers = 3;
  int64_t out_dim = 2;
  void validate() const;
};

struct PointDecoderLayer {
  Tensor w, b;              // {hidden, hidden}, {hidden}
  Tensor style_w, style_b;  // {2*hidden, style_dim}, {2*hidden}: scale half then shift half
};

struct PointDecoderParams {
  Tensor input_const;  // {hidden}
  std::vector<PointDecoderLayer> layers;
  Tensor out_w, out_b;  // {out_dim, hidden}, {out_dim}
};

struct MicroImageDecoderConfig {
  int64_t style_dim = 32;
  int64_t channels = 8;
  int64_t stages = 3;  // spatial 2 -> 4 -> 8 (each stage after the first doubles resolution)
  int64_t out_channels = 3;
  int64_t out_hw() const { return int64_t{2} << (stages - 1); }
  void validate() const;
};

struct MicroImageStage {
  Tensor conv_w, conv_b;    // {channels, channels, 3, 3}, {channels}
  Tensor style_w, style_b;  // {2*channels, style_dim}, {2*channels}
};

struct MicroImageDecoderParams {
  Tensor const_map;  // {channels, 2, 2}
  std::vector<MicroImageStage> stages;
  Tensor rgb_w, rgb_b;  // {out_channels, channels, 1, 1}, {out_channels}
};

// Feature-vector adaptation: standardize h over its coordinates, then apply
// per-coordinate scale and shift (the vector analogue of per-channel
// instance normalization).
Tensor vector_adain(const Tensor& h, const Tensor& scale_v, const Tensor& shift_v);

// Learned constant -> [linear -> adain(w) -> gelu] x layers -> linear.
Tensor decode_point(const Tensor& w, const PointDecoderConfig& cfg,
                    const PointDecoderParams& params);

// Learned constant map -> [conv3x3 -> adain(w) -> gelu] per stage with
// nearest-neighbour 2x upsampling between stages -> 1x1 conv to RGB.
Tensor decode_micro_image(const Tensor& w, const MicroImageDecoderConfig& cfg,
                          const MicroImageDecoderParams& params);

std::vector<NamedShape> param_shapes(const PointDecoderConfig& cfg);
std::vector<NamedShape> param_shapes(const MicroImageDecoderConfig& cfg);

int64_t parameter_count(const PointDecoderConfig& cfg);
int64_t parameter_count(const MicroImageDecoderConfig& cfg);

PointDecoderParams init_point_decoder(const PointDecoderConfig& cfg, uint64_t seed);
MicroImageDecoderParams init_micro_decoder(const MicroImageDecoderConfig& cfg, uint64_t seed);

std::vector<std::pair<std::string, Tensor>> named_tensors(const PointDecoderConfig& cfg,
                                                          PointDecoderParams& p);
std::vector<std::pair<std::string, Tensor>> named_tensors(const MicroImageDecoderConfig& cfg,
                                                          MicroImageDecoderParams& p);

}  // namespace rtm
