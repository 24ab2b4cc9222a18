#include "rtm/mapper.hpp"

#include <cmath>

#include "rtm/rng.hpp"

namespace rtm {

void RtmConfig::validate() const {
  if (d < 1) throw ConfigError("mapper.d: must be >= 1");
  if (s < 1) throw ConfigError("mapper.s: must be >= 1");
  if (d_h < 1) throw ConfigError("mapper.d_h: must be >= 1");
  if (H < 1) throw ConfigError("mapper.H: must be >= 1");
  if (L < 1) throw ConfigError("mapper.L: must be >= 1");
  if (expansion <= 0.0) throw ConfigError("mapper.expansion: must be positive");
  if (token_mix_hidden() < 1) throw ConfigError("mapper.expansion: token-mix hidden width < 1");
  if (channel_mix_hidden() < 1) throw ConfigError("mapper.expansion: channel-mix hidden width < 1");
  if (block == BlockKind::self_attention) {
    if (heads < 1) throw ConfigError("mapper.heads: must be >= 1");
    if (d_h % heads != 0) throw ConfigError("mapper.heads: must divide d_h");
  }
}

void BaselineMlpConfig::validate() const {
  if (d < 1) throw ConfigError("mapper.d: must be >= 1");
  if (depth < 1) throw ConfigError("mapper.depth: must be >= 1");
  if (hidden < 1) throw ConfigError("mapper.hidden: must be >= 1");
}

Tensor pixel_norm(const Tensor& z) { return rms_norm(z, kRmsNormEps); }

Tensor project_to_tokens(const Tensor& z, const RtmConfig& cfg, const RtmParams& params) {
  if (z.ndim() != 1 || z.dim(0) != cfg.d)
    throw ShapeError("project_to_tokens: latent shape " + shape_str(z.shape()) + ", expected {" +
                     std::to_string(cfg.d) + "}");
  Tensor flat = add(matvec(params.w_proj, z), params.b_proj);
  return reshape(flat, {cfg.s, cfg.d_h});
}

namespace {

// Rows of m are independent inputs: out = (silu(m Wg^T + bg) .* (m Wu^T + bu)) Wd^T + bd.
Tensor gated_mlp_rows(const Tensor& m, const GatedMlpParams& p) {
  Tensor gate = add_rowvec(matmul_nt(m, p.w_gate), p.b_gate);
  Tensor up = add_rowvec(matmul_nt(m, p.w_up), p.b_up);
  return add_rowvec(matmul_nt(mul(silu(gate), up), p.w_down), p.b_down);
}

Tensor multi_head_attention(const Tensor& x, const AttentionParams& p, int64_t heads) {
  int64_t d_h = x.dim(1);
  int64_t head_dim = d_h / heads;
  Tensor q = add_rowvec(matmul_nt(x, p.w_q), p.b_q);
  Tensor k = add_rowvec(matmul_nt(x, p.w_k), p.b_k);
  Tensor v = add_rowvec(matmul_nt(x, p.w_v), p.b_v);
  Tensor merged;
  for (int64_t h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * head_dim, (h + 1) * head_dim);
    Tensor kh = slice_cols(k, h * head_dim, (h + 1) * head_dim);
    Tensor vh = slice_cols(v, h * head_dim, (h + 1) * head_dim);
    Tensor att = softmax_rows(scale(matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(head_dim))));
    Tensor oh = matmul(att, vh);
    merged = (h == 0) ? oh : concat_cols(merged, oh);
  }
  return add_rowvec(matmul_nt(merged, p.w_o), p.b_o);
}

Tensor readout(const Tensor& z_h, const RtmConfig& cfg, const RtmParams& params) {
  return add(matvec(params.w_out, reshape(z_h, {cfg.s * cfg.d_h})), params.b_out);
}

}  // namespace

Tensor shared_block(const Tensor& z_state, const Tensor& ctx, const BlockParams& params,
                    const RtmConfig& cfg) {
  if (z_state.shape() != ctx.shape())
    throw ShapeError("shared_block: state " + shape_str(z_state.shape()) + " vs ctx " +
                     shape_str(ctx.shape()));
  Tensor u0 = add(z_state, ctx);
  Tensor mix;
  if (cfg.block == BlockKind::token_mixer) {
    // Mix along the token axis: transpose so tokens become the row width.
    mix = transpose(gated_mlp_rows(transpose(u0), params.token_mix));
  } else {
    mix = multi_head_attention(u0, params.attention, cfg.heads);
  }
  Tensor u1 = rms_norm(add(u0, mix), kRmsNormEps);
  Tensor u2 = rms_norm(add(u1, gated_mlp_rows(u1, params.channel_mix)), kRmsNormEps);
  return u2;
}

RecurrenceResult run_recurrence(const Tensor& z0, Tensor z_h, Tensor z_l, int64_t outer_steps,
                                int64_t inner_cycles, GradScope scope,
                                const std::function<Tensor(const Tensor&, const Tensor&)>& block) {
  RecurrenceResult res;
  for (int64_t h = 1; h <= outer_steps; ++h) {
    bool final_step = (h == outer_steps);
    std::optional<GradPause> pause;
    if (scope == GradScope::final_step_only && !final_step) pause.emplace();
    for (int64_t l = 0; l < inner_cycles; ++l) {
      z_l = block(z_l, add(z_h, z0));
      ++res.block_evals;
    }
    z_h = block(z_h, z_l);
    ++res.block_evals;
    if (!all_finite(z_h) || !all_finite(z_l))
      throw NumericError("rtm_forward: non-finite carry at refinement step " + std::to_string(h));
  }
  res.z_h = std::move(z_h);
  res.z_l = std::move(z_l);
  return res;
}

MapperOutput rtm_forward(const Tensor& z, const RtmConfig& cfg, const RtmParams& params,
                         std::optional<int64_t> inference_H, GradScope scope) {
  int64_t steps = inference_H.value_or(cfg.H);
  if (steps < 1) throw ConfigError("mapper.H: inference override must be >= 1");
  Tensor z0 = project_to_tokens(pixel_norm(z), cfg, params);
  RecurrenceResult rec =
      run_recurrence(z0, params.z_h_init, params.z_l_init, steps, cfg.L, scope,
                     [&](const Tensor& state, const Tensor& ctx) {
                       return shared_block(state, ctx, params.block, cfg);
                     });
  return {readout(rec.z_h, cfg, params), rec.block_evals};
}

Tensor baseline_mlp_forward(const Tensor& z, const BaselineMlpConfig& cfg, const MlpParams& params) {
  if (z.ndim() != 1 || z.dim(0) != cfg.d)
    throw ShapeError("baseline_mlp_forward: latent shape " + shape_str(z.shape()));
  if (params.weights.size() != static_cast<size_t>(cfg.depth) ||
      params.biases.size() != params.weights.size())
    throw ShapeError("baseline_mlp_forward: expected " + std::to_string(cfg.depth) + " layers");
  Tensor h = pixel_norm(z);
  for (size_t i = 0; i < params.weights.size(); ++i)
    h = leaky_relu(add(matvec(params.weights[i], h), params.biases[i]), kLeakySlope);
  return h;
}

bool rtm_gradient_scope_check(const RtmConfig& cfg, const RtmParams& params, const Tensor& z) {
  if (cfg.H < 2) throw ConfigError("mapper.H: gradient scope check needs H >= 2");
  RtmParams p = params;  // handle copies share storage; gradients land on the same nodes
  std::vector<Tensor> leaves;
  for (auto& [name, t] : named_tensors(cfg, p)) {
    (void)name;
    leaves.push_back(t);
  }
  Tensor zl = z;
  leaves.push_back(zl);
  for (auto& t : leaves) t.set_requires_grad(true);

  auto collect = [&leaves] {
    std::vector<std::vector<double>> g;
    g.reserve(leaves.size());
    for (const auto& t : leaves) g.push_back(t.grad());
    return g;
  };

  // Route A: the training-mode forward.
  std::vector<std::vector<double>> grads_training;
  {
    Tape tape;
    TapeScope scope(tape);
    MapperOutput out = rtm_forward(zl, cfg, p, {}, GradScope::final_step_only);
    backward(sum_all(mul(out.w, out.w)));
    grads_training = collect();
  }

  // Route B: run the first H-1 steps with no recording at all, freeze the
  // carries as plain constants, and differentiate a hand-rolled final step.
  Tensor z_h_frozen, z_l_frozen;
  {
    GradPause pause;
    Tensor z0 = project_to_tokens(pixel_norm(zl), cfg, p);
    RecurrenceResult prefix =
        run_recurrence(z0, p.z_h_init, p.z_l_init, cfg.H - 1, cfg.L, GradScope::full_graph,
                       [&](const Tensor& state, const Tensor& ctx) {
                         return shared_block(state, ctx, p.block, cfg);
                       });
    z_h_frozen = Tensor::from_values(prefix.z_h.shape(), prefix.z_h.values());
    z_l_frozen = Tensor::from_values(prefix.z_l.shape(), prefix.z_l.values());
  }
  std::vector<std::vector<double>> grads_replay;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor z0 = project_to_tokens(pixel_norm(zl), cfg, p);
    Tensor z_h = z_h_frozen, z_l = z_l_frozen;
    for (int64_t l = 0; l < cfg.L; ++l) z_l = shared_block(z_l, add(z_h, z0), p.block, cfg);
    z_h = shared_block(z_h, z_l, p.block, cfg);
    backward(sum_all(mul(readout(z_h, cfg, p), readout(z_h, cfg, p))));
    grads_replay = collect();
  }

  if (grads_training.size() != grads_replay.size()) return false;
  for (size_t i = 0; i < grads_training.size(); ++i)
    if (grads_training[i] != grads_replay[i]) return false;
  return true;
}

// ----- parameter enumeration / initialization -----

std::vector<NamedShape> param_shapes(const RtmConfig& cfg) {
  cfg.validate();
  std::vector<NamedShape> out;
  int64_t tok = cfg.s * cfg.d_h;
  out.push_back({"mapper/w_proj", {tok, cfg.d}, InitKind::normal_weight});
  out.push_back({"mapper/b_proj", {tok}, InitKind::zero});
  out.push_back({"mapper/z_h_init", {cfg.s, cfg.d_h}, InitKind::zero});
  out.push_back({"mapper/z_l_init", {cfg.s, cfg.d_h}, InitKind::zero});
  if (cfg.block == BlockKind::token_mixer) {
    int64_t hs = cfg.token_mix_hidden();
    out.push_back({"mapper/block/token_gate_w", {hs, cfg.s}, InitKind::normal_weight});
    out.push_back({"mapper/block/token_gate_b", {hs}, InitKind::zero});
    out.push_back({"mapper/block/token_up_w", {hs, cfg.s}, InitKind::normal_weight});
    out.push_back({"mapper/block/token_up_b", {hs}, InitKind::zero});
    out.push_back({"mapper/block/token_down_w", {cfg.s, hs}, InitKind::normal_weight});
    out.push_back({"mapper/block/token_down_b", {cfg.s}, InitKind::zero});
  } else {
    for (const char* n : {"q", "k", "v", "o"}) {
      out.push_back({std::string("mapper/block/attn_") + n + "_w", {cfg.d_h, cfg.d_h},
                     InitKind::normal_weight});
      out.push_back({std::string("mapper/block/attn_") + n + "_b", {cfg.d_h}, InitKind::zero});
    }
  }
  int64_t hc = cfg.channel_mix_hidden();
  out.push_back({"mapper/block/channel_gate_w", {hc, cfg.d_h}, InitKind::normal_weight});
  out.push_back({"mapper/block/channel_gate_b", {hc}, InitKind::zero});
  out.push_back({"mapper/block/channel_up_w", {hc, cfg.d_h}, InitKind::normal_weight});
  out.push_back({"mapper/block/channel_up_b", {hc}, InitKind::zero});
  out.push_back({"mapper/block/channel_down_w", {cfg.d_h, hc}, InitKind::normal_weight});
  out.push_back({"mapper/block/channel_down_b", {cfg.d_h}, InitKind::zero});
  out.push_back({"mapper/w_out", {cfg.d, tok}, InitKind::normal_weight});
  out.push_back({"mapper/b_out", {cfg.d}, InitKind::zero});
  return out;
}

std::vector<NamedShape> param_shapes(const BaselineMlpConfig& cfg) {
  cfg.validate();
  std::vector<NamedShape> out;
  for (int64_t i = 0; i < cfg.depth; ++i) {
    int64_t in = (i == 0) ? cfg.d : cfg.hidden;
    int64_t o = (i == cfg.depth - 1) ? cfg.d : cfg.hidden;
    std::string tag = "mapper/layer" + std::to_string(i);
    out.push_back({tag + "_w", {o, in}, InitKind::normal_weight});
    out.push_back({tag + "_b", {o}, InitKind::zero});
  }
  return out;
}

int64_t parameter_count(const RtmConfig& cfg) {
  int64_t total = 0;
  for (const auto& ns : param_shapes(cfg)) total += shape_numel(ns.shape);
  return total;
}

int64_t parameter_count(const BaselineMlpConfig& cfg) {
  int64_t total = 0;
  for (const auto& ns : param_shapes(cfg)) total += shape_numel(ns.shape);
  return total;
}

Tensor init_tensor(const NamedShape& ns, uint64_t seed) {
  Tensor t = Tensor::zeros(ns.shape);
  if (ns.init == InitKind::normal_weight) {
    rng::Stream stream(seed, "init", rng::hash_tag(ns.name));
    for (int64_t i = 0; i < t.numel(); ++i)
      t.data()[i] = kInitStd * stream.normal(static_cast<uint64_t>(i));
  } else if (ns.init == InitKind::scale_shift_bias) {
    // Style-affine bias: scale half starts at 1 (neutral modulation), shift half at 0.
    for (int64_t i = 0; i < t.numel() / 2; ++i) t.data()[i] = 1.0;
  }
  round_to_float32(t);
  return t;
}

namespace {
// Pops tensors off an initialized list in param_shapes order.
struct ShapeCursor {
  const std::vector<NamedShape>& shapes;
  uint64_t seed;
  size_t next = 0;
  Tensor take() { return init_tensor(shapes[next++], seed); }
};
}  // namespace

RtmParams init_rtm_params(const RtmConfig& cfg, uint64_t seed) {
  auto shapes = param_shapes(cfg);
  ShapeCursor cur{shapes, seed};
  RtmParams p;
  p.w_proj = cur.take();
  p.b_proj = cur.take();
  p.z_h_init = cur.take();
  p.z_l_init = cur.take();
  if (cfg.block == BlockKind::token_mixer) {
    p.block.token_mix.w_gate = cur.take();
    p.block.token_mix.b_gate = cur.take();
    p.block.token_mix.w_up = cur.take();
    p.block.token_mix.b_up = cur.take();
    p.block.token_mix.w_down = cur.take();
    p.block.token_mix.b_down = cur.take();
  } else {
    p.block.attention.w_q = cur.take();
    p.block.attention.b_q = cur.take();
    p.block.attention.w_k = cur.take();
    p.block.attention.b_k = cur.take();
    p.block.attention.w_v = cur.take();
    p.block.attention.b_v = cur.take();
    p.block.attention.w_o = cur.take();
    p.block.attention.b_o = cur.take();
  }
  p.block.channel_mix.w_gate = cur.take();
  p.block.channel_mix.b_gate = cur.take();
  p.block.channel_mix.w_up = cur.take();
  p.block.channel_mix.b_up = cur.take();
  p.block.channel_mix.w_down = cur.take();
  p.block.channel_mix.b_down = cur.take();
  p.w_out = cur.take();
  p.b_out = cur.take();
  return p;
}

MlpParams init_mlp_params(const BaselineMlpConfig& cfg, uint64_t seed) {
  auto shapes = param_shapes(cfg);
  ShapeCursor cur{shapes, seed};
  MlpParams p;
  for (int64_t i = 0; i < cfg.depth; ++i) {
    p.weights.push_back(cur.take());
    p.biases.push_back(cur.take());
  }
  return p;
}

std::vector<std::pair<std::string, Tensor>> named_tensors(const RtmConfig& cfg, RtmParams& p) {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("mapper/w_proj", p.w_proj);
  out.emplace_back("mapper/b_proj", p.b_proj);
  out.emplace_back("mapper/z_h_init", p.z_h_init);
  out.emplace_back("mapper/z_l_init", p.z_l_init);
  if (cfg.block == BlockKind::token_mixer) {
    out.emplace_back("mapper/block/token_gate_w", p.block.token_mix.w_gate);
    out.emplace_back("mapper/block/token_gate_b", p.block.token_mix.b_gate);
    out.emplace_back("mapper/block/token_up_w", p.block.token_mix.w_up);
    out.emplace_back("mapper/block/token_up_b", p.block.token_mix.b_up);
    out.emplace_back("mapper/block/token_down_w", p.block.token_mix.w_down);
    out.emplace_back("mapper/block/token_down_b", p.block.token_mix.b_down);
  } else {
    out.emplace_back("mapper/block/attn_q_w", p.block.attention.w_q);
    out.emplace_back("mapper/block/attn_q_b", p.block.attention.b_q);
    out.emplace_back("mapper/block/attn_k_w", p.block.attention.w_k);
    out.emplace_back("mapper/block/attn_k_b", p.block.attention.b_k);
    out.emplace_back("mapper/block/attn_v_w", p.block.attention.w_v);
    out.emplace_back("mapper/block/attn_v_b", p.block.attention.b_v);
    out.emplace_back("mapper/block/attn_o_w", p.block.attention.w_o);
    out.emplace_back("mapper/block/attn_o_b", p.block.attention.b_o);
  }
  out.emplace_back("mapper/block/channel_gate_w", p.block.channel_mix.w_gate);
  out.emplace_back("mapper/block/channel_gate_b", p.block.channel_mix.b_gate);
  out.emplace_back("mapper/block/channel_up_w", p.block.channel_mix.w_up);
  out.emplace_back("mapper/block/channel_up_b", p.block.channel_mix.b_up);
  out.emplace_back("mapper/block/channel_down_w", p.block.channel_mix.w_down);
  out.emplace_back("mapper/block/channel_down_b", p.block.channel_mix.b_down);
  out.emplace_back("mapper/w_out", p.w_out);
  out.emplace_back("mapper/b_out", p.b_out);
  return out;
}

std::vector<std::pair<std::string, Tensor>> named_tensors(const BaselineMlpConfig& cfg,
                                                          MlpParams& p) {
  std::vector<std::pair<std::string, Tensor>> out;
  for (int64_t i = 0; i < cfg.depth; ++i) {
    std::string tag = "mapper/layer" + std::to_string(i);
    out.emplace_back(tag + "_w", p.weights[static_cast<size_t>(i)]);
    out.emplace_back(tag + "_b", p.biases[static_cast<size_t>(i)]);
  }
  return out;
}

}  // namespace rtm
