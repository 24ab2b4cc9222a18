#include "rtm/decoder.hpp"

namespace rtm {

void PointDecoderConfig::validate() const {
  if (style_dim < 1) throw ConfigError("decoder.style_dim: must be >= 1");
  if (hidden < 1) throw ConfigError("decoder.hidden: must be >= 1");
  if (layers < 1) throw ConfigError("decoder.layers: must be >= 1");
  if (out_dim < 1) throw ConfigError("decoder.out_dim: must be >= 1");
}

void MicroImageDecoderConfig::validate() const {
  if (style_dim < 1) throw ConfigError("decoder.style_dim: must be >= 1");
  if (channels < 1) throw ConfigError("decoder.channels: must be >= 1");
  if (stages < 1) throw ConfigError("decoder.stages: must be >= 1");
  if (out_channels < 1) throw ConfigError("decoder.out_channels: must be >= 1");
}

Tensor vector_adain(const Tensor& h, const Tensor& scale_v, const Tensor& shift_v) {
  if (h.shape() != scale_v.shape() || h.shape() != shift_v.shape())
    throw ShapeError("vector_adain: feature " + shape_str(h.shape()) + " vs style " +
                     shape_str(scale_v.shape()) + "/" + shape_str(shift_v.shape()));
  return add(mul(layer_norm(h, kLayerNormEps), scale_v), shift_v);
}

namespace {

// (scale, shift) halves of the style affine output.
std::pair<Tensor, Tensor> style_pair(const Tensor& w, const Tensor& style_w,
                                     const Tensor& style_b) {
  Tensor both = add(matvec(style_w, w), style_b);
  int64_t width = both.dim(0) / 2;
  return {slice_vec(both, 0, width), slice_vec(both, width, 2 * width)};
}

}  // namespace

Tensor decode_point(const Tensor& w, const PointDecoderConfig& cfg,
                    const PointDecoderParams& params) {
  if (w.ndim() != 1 || w.dim(0) != cfg.style_dim)
    throw ShapeError("decode_point: style shape " + shape_str(w.shape()) + ", expected {" +
                     std::to_string(cfg.style_dim) + "}");
  Tensor h = params.input_const;
  for (const auto& layer : params.layers) {
    h = add(matvec(layer.w, h), layer.b);
    auto [sc, sh] = style_pair(w, layer.style_w, layer.style_b);
    h = gelu(vector_adain(h, sc, sh));
  }
  Tensor out = add(matvec(params.out_w, h), params.out_b);
  if (!all_finite(out)) throw NumericError("decode_point: non-finite output");
  return out;
}

Tensor decode_micro_image(const Tensor& w, const MicroImageDecoderConfig& cfg,
                          const MicroImageDecoderParams& params) {
  if (w.ndim() != 1 || w.dim(0) != cfg.style_dim)
    throw ShapeError("decode_micro_image: style shape " + shape_str(w.shape()));
  Tensor x = params.const_map;
  for (size_t i = 0; i < params.stages.size(); ++i) {
    if (i > 0) x = upsample_nearest_2x(x);
    const auto& st = params.stages[i];
    x = conv2d(x, st.conv_w, st.conv_b);
    auto [sc, sh] = style_pair(w, st.style_w, st.style_b);
    int64_t C = x.dim(0), hw = x.dim(1) * x.dim(2);
    Shape spatial = x.shape();
    x = reshape(gelu(adain(reshape(x, {C, hw}), sc, sh, kLayerNormEps)), spatial);
  }
  Tensor out = conv2d(x, params.rgb_w, params.rgb_b);
  if (!all_finite(out)) throw NumericError("decode_micro_image: non-finite output");
  return out;
}

std::vector<NamedShape> param_shapes(const PointDecoderConfig& cfg) {
  cfg.validate();
  std::vector<NamedShape> out;
  out.push_back({"decoder/input_const", {cfg.hidden}, InitKind::normal_weight});
  for (int64_t i = 0; i < cfg.layers; ++i) {
    std::string tag = "decoder/layer" + std::to_string(i);
    out.push_back({tag + "_w", {cfg.hidden, cfg.hidden}, InitKind::normal_weight});
    out.push_back({tag + "_b", {cfg.hidden}, InitKind::zero});
    out.push_back({tag + "_style_w", {2 * cfg.hidden, cfg.style_dim}, InitKind::normal_weight});
    out.push_back({tag + "_style_b", {2 * cfg.hidden}, InitKind::scale_shift_bias});
  }
  out.push_back({"decoder/out_w", {cfg.out_dim, cfg.hidden}, InitKind::normal_weight});
  out.push_back({"decoder/out_b", {cfg.out_dim}, InitKind::zero});
  return out;
}

std::vector<NamedShape> param_shapes(const MicroImageDecoderConfig& cfg) {
  cfg.validate();
  std::vector<NamedShape> out;
  out.push_back({"decoder/const_map", {cfg.channels, 2, 2}, InitKind::normal_weight});
  for (int64_t i = 0; i < cfg.stages; ++i) {
    std::string tag = "decoder/stage" + std::to_string(i);
    out.push_back({tag + "_conv_w", {cfg.channels, cfg.channels, 3, 3}, InitKind::normal_weight});
    out.push_back({tag + "_conv_b", {cfg.channels}, InitKind::zero});
    out.push_back({tag + "_style_w", {2 * cfg.channels, cfg.style_dim}, InitKind::normal_weight});
    out.push_back({tag + "_style_b", {2 * cfg.channels}, InitKind::scale_shift_bias});
  }
  out.push_back({"decoder/rgb_w", {cfg.out_channels, cfg.channels, 1, 1}, InitKind::normal_weight});
  out.push_back({"decoder/rgb_b", {cfg.out_channels}, InitKind::zero});
  return out;
}

int64_t parameter_count(const PointDecoderConfig& cfg) {
  int64_t total = 0;
  for (const auto& ns : param_shapes(cfg)) total += shape_numel(ns.shape);
  return total;
}

int64_t parameter_count(const MicroImageDecoderConfig& cfg) {
  int64_t total = 0;
  for (const auto& ns : param_shapes(cfg)) total += shape_numel(ns.shape);
  return total;
}

PointDecoderParams init_point_decoder(const PointDecoderConfig& cfg, uint64_t seed) {
  auto shapes = param_shapes(cfg);
  size_t next = 0;
  auto take = [&] { return init_tensor(shapes[next++], seed); };
  PointDecoderParams p;
  p.input_const = take();
  for (int64_t i = 0; i < cfg.layers; ++i) {
    PointDecoderLayer layer;
    layer.w = take();
    layer.b = take();
    layer.style_w = take();
    layer.style_b = take();
    p.layers.push_back(std::move(layer));
  }
  p.out_w = take();
  p.out_b = take();
  return p;
}

MicroImageDecoderParams init_micro_decoder(const MicroImageDecoderConfig& cfg, uint64_t seed) {
  auto shapes = param_shapes(cfg);
  size_t next = 0;
  auto take = [&] { return init_tensor(shapes[next++], seed); };
  MicroImageDecoderParams p;
  p.const_map = take();
  for (int64_t i = 0; i < cfg.stages; ++i) {
    MicroImageStage st;
    st.conv_w = take();
    st.conv_b = take();
    st.style_w = take();
    st.style_b = take();
    p.stages.push_back(std::move(st));
  }
  p.rgb_w = take();
  p.rgb_b = take();
  return p;
}

std::vector<std::pair<std::string, Tensor>> named_tensors(const PointDecoderConfig& cfg,
                                                          PointDecoderParams& p) {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("decoder/input_const", p.input_const);
  for (int64_t i = 0; i < cfg.layers; ++i) {
    std::string tag = "decoder/layer" + std::to_string(i);
    auto& layer = p.layers[static_cast<size_t>(i)];
    out.emplace_back(tag + "_w", layer.w);
    out.emplace_back(tag + "_b", layer.b);
    out.emplace_back(tag + "_style_w", layer.style_w);
    out.emplace_back(tag + "_style_b", layer.style_b);
  }
  out.emplace_back("decoder/out_w", p.out_w);
  out.emplace_back("decoder/out_b", p.out_b);
  return out;
}

std::vector<std::pair<std::string, Tensor>> named_tensors(const MicroImageDecoderConfig& cfg,
                                                          MicroImageDecoderParams& p) {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("decoder/const_map", p.const_map);
  for (int64_t i = 0; i < cfg.stages; ++i) {
    std::string tag = "decoder/stage" + std::to_string(i);
    auto& st = p.stages[static_cast<size_t>(i)];
    out.emplace_back(tag + "_conv_w", st.conv_w);
    out.emplace_back(tag + "_conv_b", st.conv_b);
    out.emplace_back(tag + "_style_w", st.style_w);
    out.emplace_back(tag + "_style_b", st.style_b);
  }
  out.emplace_back("decoder/rgb_w", p.rgb_w);
  out.emplace_back("decoder/rgb_b", p.rgb_b);
  return out;
}

}  // namespace rtm
