#include "rtm/generator.hpp"

#include <stdexcept>

#include "rtm/error.hpp"

namespace rtm {

Shape GeneratorConfig::sample_shape() const {
  if (decoder == DecoderKind::point) return {point.out_dim};
  return {micro.out_channels, micro.out_hw(), micro.out_hw()};
}

void GeneratorConfig::validate() const {
  if (mapper == MapperKind::rtm) {
    rtm.validate();
  } else {
    mlp.validate();
  }
  const int64_t style_dim = latent_dim();
  if (decoder == DecoderKind::point) {
    point.validate();
    if (point.style_dim != style_dim)
      throw ConfigError("decoder.style_dim: must equal mapper output width " +
                        std::to_string(style_dim) + ", got " + std::to_string(point.style_dim));
  } else {
    micro.validate();
    if (micro.style_dim != style_dim)
      throw ConfigError("decoder.style_dim: must equal mapper output width " +
                        std::to_string(style_dim) + ", got " + std::to_string(micro.style_dim));
  }
}

GeneratorParams init_generator(const GeneratorConfig& cfg, uint64_t seed) {
  cfg.validate();
  GeneratorParams p;
  if (cfg.mapper == MapperKind::rtm) {
    p.rtm = init_rtm_params(cfg.rtm, seed);
  } else {
    p.mlp = init_mlp_params(cfg.mlp, seed);
  }
  if (cfg.decoder == DecoderKind::point) {
    p.point = init_point_decoder(cfg.point, seed);
  } else {
    p.micro = init_micro_decoder(cfg.micro, seed);
  }
  return p;
}

ParamRegistry collect_params(const GeneratorConfig& cfg, GeneratorParams& params) {
  ParamRegistry out;
  if (cfg.mapper == MapperKind::rtm) {
    if (!params.rtm) throw std::logic_error("collect_params: missing rtm params");
    for (auto& nt : named_tensors(cfg.rtm, *params.rtm)) out.push_back(nt);
  } else {
    if (!params.mlp) throw std::logic_error("collect_params: missing mlp params");
    for (auto& nt : named_tensors(cfg.mlp, *params.mlp)) out.push_back(nt);
  }
  if (cfg.decoder == DecoderKind::point) {
    if (!params.point) throw std::logic_error("collect_params: missing point decoder params");
    for (auto& nt : named_tensors(cfg.point, *params.point)) out.push_back(nt);
  } else {
    if (!params.micro) throw std::logic_error("collect_params: missing micro decoder params");
    for (auto& nt : named_tensors(cfg.micro, *params.micro)) out.push_back(nt);
  }
  return out;
}

int64_t parameter_count(const GeneratorConfig& cfg) {
  int64_t total = 0;
  if (cfg.mapper == MapperKind::rtm) {
    total += parameter_count(cfg.rtm);
  } else {
    total += parameter_count(cfg.mlp);
  }
  if (cfg.decoder == DecoderKind::point) {
    total += parameter_count(cfg.point);
  } else {
    total += parameter_count(cfg.micro);
  }
  return total;
}

int64_t mapper_sequential_depth(const GeneratorConfig& cfg) {
  if (cfg.mapper == MapperKind::rtm) return cfg.rtm.H * (cfg.rtm.L + 1);
  return cfg.mlp.depth;
}

GeneratorParams clone_params(const GeneratorConfig& cfg, const GeneratorParams& params) {
  GeneratorParams copy;
  if (params.rtm) copy.rtm = *params.rtm;
  if (params.mlp) copy.mlp = *params.mlp;
  if (params.point) copy.point = *params.point;
  if (params.micro) copy.micro = *params.micro;
  // Param structs hold shared Tensor handles; re-point every field at a
  // fresh node so the copy owns its own storage.
  auto clone_tensor = [](const Tensor& t) {
    return Tensor::from_values(t.shape(), t.values());
  };
  if (copy.rtm) {
    RtmParams& r = *copy.rtm;
    r.w_proj = clone_tensor(r.w_proj);
    r.b_proj = clone_tensor(r.b_proj);
    r.z_h_init = clone_tensor(r.z_h_init);
    r.z_l_init = clone_tensor(r.z_l_init);
    auto clone_mlp = [&](GatedMlpParams& g) {
      g.w_gate = clone_tensor(g.w_gate);
      g.b_gate = clone_tensor(g.b_gate);
      g.w_up = clone_tensor(g.w_up);
      g.b_up = clone_tensor(g.b_up);
      g.w_down = clone_tensor(g.w_down);
      g.b_down = clone_tensor(g.b_down);
    };
    if (cfg.rtm.block == BlockKind::token_mixer) {
      clone_mlp(r.block.token_mix);
    } else {
      AttentionParams& a = r.block.attention;
      a.w_q = clone_tensor(a.w_q);
      a.b_q = clone_tensor(a.b_q);
      a.w_k = clone_tensor(a.w_k);
      a.b_k = clone_tensor(a.b_k);
      a.w_v = clone_tensor(a.w_v);
      a.b_v = clone_tensor(a.b_v);
      a.w_o = clone_tensor(a.w_o);
      a.b_o = clone_tensor(a.b_o);
    }
    clone_mlp(r.block.channel_mix);
    r.w_out = clone_tensor(r.w_out);
    r.b_out = clone_tensor(r.b_out);
  }
  if (copy.mlp) {
    for (auto& w : copy.mlp->weights) w = clone_tensor(w);
    for (auto& b : copy.mlp->biases) b = clone_tensor(b);
  }
  if (copy.point) {
    PointDecoderParams& d = *copy.point;
    d.input_const = clone_tensor(d.input_const);
    for (auto& layer : d.layers) {
      layer.w = clone_tensor(layer.w);
      layer.b = clone_tensor(layer.b);
      layer.style_w = clone_tensor(layer.style_w);
      layer.style_b = clone_tensor(layer.style_b);
    }
    d.out_w = clone_tensor(d.out_w);
    d.out_b = clone_tensor(d.out_b);
  }
  if (copy.micro) {
    MicroImageDecoderParams& d = *copy.micro;
    d.const_map = clone_tensor(d.const_map);
    for (auto& stage : d.stages) {
      stage.conv_w = clone_tensor(stage.conv_w);
      stage.conv_b = clone_tensor(stage.conv_b);
      stage.style_w = clone_tensor(stage.style_w);
      stage.style_b = clone_tensor(stage.style_b);
    }
    d.rgb_w = clone_tensor(d.rgb_w);
    d.rgb_b = clone_tensor(d.rgb_b);
  }
  return copy;
}

GenerateResult generate_one(const Tensor& z, const GeneratorConfig& cfg,
                            const GeneratorParams& params, std::optional<int64_t> h_override,
                            GradScope scope) {
  Tensor w;
  int64_t evals = 0;
  if (cfg.mapper == MapperKind::rtm) {
    if (!params.rtm) throw std::logic_error("generate_one: missing rtm params");
    MapperOutput mo = rtm_forward(z, cfg.rtm, *params.rtm, h_override, scope);
    w = mo.w;
    evals = mo.block_evals;
  } else {
    if (!params.mlp) throw std::logic_error("generate_one: missing mlp params");
    w = baseline_mlp_forward(z, cfg.mlp, *params.mlp);
  }
  GenerateResult out;
  out.block_evals = evals;
  if (cfg.decoder == DecoderKind::point) {
    if (!params.point) throw std::logic_error("generate_one: missing point decoder params");
    out.sample = decode_point(w, cfg.point, *params.point);
  } else {
    if (!params.micro) throw std::logic_error("generate_one: missing micro decoder params");
    out.sample = decode_micro_image(w, cfg.micro, *params.micro);
  }
  return out;
}

Matrix batch_generate(const Matrix& latents, const GeneratorConfig& cfg,
                      const GeneratorParams& params, std::optional<int64_t> h_override) {
  if (latents.cols != cfg.latent_dim())
    throw ShapeError("batch_generate: latent width " + std::to_string(latents.cols) +
                     " != mapper input " + std::to_string(cfg.latent_dim()));
  const int64_t n = latents.rows;
  const int64_t dim = cfg.sample_dim();
  Matrix out(n, dim);
  std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < n; ++i) {
    if (failure) continue;
    try {
      GradPause pause;
      Tensor z = Tensor::from_values({latents.cols},
                                     std::vector<double>(latents.row(i), latents.row(i) + latents.cols));
      GenerateResult r = generate_one(z, cfg, params, h_override, GradScope::final_step_only);
      const std::vector<double>& v = r.sample.values();
      for (int64_t j = 0; j < dim; ++j) out.at(i, j) = v[static_cast<size_t>(j)];
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace rtm
