#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rtm/tensor.hpp"

// Mapping networks: the recursive token mapper (one shared block reused over
// H refinement steps of L inner cycles, with the projected noise tokens
// re-injected every inner cycle and only the final step differentiated
// through) and the plain deep-MLP baseline it is ablated against.

namespace rtm {

constexpr double kRmsNormEps = 1e-6;
constexpr double kLayerNormEps = 1e-5;
constexpr double kLeakySlope = 0.2;
constexpr double kInitStd = 0.02;

enum class BlockKind { token_mixer, self_attention };

struct RtmConfig {
  int64_t d = 32;    // latent/style width
  int64_t s = 8;     // token count
  int64_t d_h = 16;  // channels per token
  int64_t H = 8;     // refinement steps
  int64_t L = 2;     // inner cycles per step
  BlockKind block = BlockKind::token_mixer;
  double expansion = 2.0;  // gated-MLP hidden = expansion * mixed-axis width
  int64_t heads = 2;       // self_attention only

  int64_t token_mix_hidden() const { return static_cast<int64_t>(expansion * static_cast<double>(s)); }
  int64_t channel_mix_hidden() const {
    return static_cast<int64_t>(expansion * static_cast<double>(d_h));
  }
  void validate() const;  // throws ConfigError with a "mapper.<field>" path
};

struct GatedMlpParams {
  Tensor w_gate, b_gate;  // {hidden, in}, {hidden}
  Tensor w_up, b_up;      // {hidden, in}, {hidden}
  Tensor w_down, b_down;  // {in, hidden}, {in}
};

struct AttentionParams {
  Tensor w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o;  // all {d_h, d_h} / {d_h}
};

struct BlockParams {
  GatedMlpParams token_mix;   // token_mixer kind only
  AttentionParams attention;  // self_attention kind only
  GatedMlpParams channel_mix;
};

struct RtmParams {
  Tensor w_proj, b_proj;        // {s*d_h, d}, {s*d_h}
  Tensor z_h_init, z_l_init;    // carries, {s, d_h} each, learnable zeros
  BlockParams block;            // the single shared block
  Tensor w_out, b_out;          // {d, s*d_h}, {d}
};

struct MapperOutput {
  Tensor w;             // style vector, length d
  int64_t block_evals;  // measured shared-block applications
};

struct BaselineMlpConfig {
  int64_t d = 32;
  int64_t depth = 8;
  int64_t hidden = 32;
  void validate() const;
};

struct MlpParams {
  std::vector<Tensor> weights;  // layer i: {out_i, in_i}
  std::vector<Tensor> biases;   // layer i: {out_i}
};

// Whether a taped forward records the whole unrolled recursion or only the
// final refinement step (the training rule). With no active tape the choice
// is irrelevant.
enum class GradScope { final_step_only, full_graph };

// z / sqrt(mean(z^2) + eps).
Tensor pixel_norm(const Tensor& z);

// Z_0 = reshape(W_proj z + b_proj) as {s, d_h}.
Tensor project_to_tokens(const Tensor& z, const RtmConfig& cfg, const RtmParams& params);

// One shared-block application: u0 = Z + ctx; mix across tokens (gated MLP on
// the token axis, or multi-head self-attention); u1 = rms_norm(u0 + mix);
// u2 = rms_norm(u1 + channel_mix(u1)).
Tensor shared_block(const Tensor& z_state, const Tensor& ctx, const BlockParams& params,
                    const RtmConfig& cfg);

// The bare recursion skeleton, parameterized over the block so tests can
// substitute e.g. an identity block: per outer step, z_l <- block(z_l, z_h +
// z0) L times, then z_h <- block(z_h, z_l); non-final steps run without
// gradient recording when final_step_only is set.
struct RecurrenceResult {
  Tensor z_h, z_l;
  int64_t block_evals = 0;
};
RecurrenceResult run_recurrence(const Tensor& z0, Tensor z_h, Tensor z_l, int64_t outer_steps,
                                int64_t inner_cycles, GradScope scope,
                                const std::function<Tensor(const Tensor&, const Tensor&)>& block);

MapperOutput rtm_forward(const Tensor& z, const RtmConfig& cfg, const RtmParams& params,
                         std::optional<int64_t> inference_H = {},
                         GradScope scope = GradScope::final_step_only);

Tensor baseline_mlp_forward(const Tensor& z, const BaselineMlpConfig& cfg, const MlpParams& params);

// Verifies the training-mode gradient equals a manual replay of only the
// final refinement step with its incoming carries frozen as constants;
// comparison is bit-exact.
bool rtm_gradient_scope_check(const RtmConfig& cfg, const RtmParams& params, const Tensor& z);

// Stable enumeration of every trainable tensor's name and shape; the single
// source of truth for initialization, counting, and checkpoint layout.
enum class InitKind {
  normal_weight,     // normal(0, 0.02)
  zero,              // biases, carries
  scale_shift_bias,  // style-affine bias: ones for the scale half, zeros for the shift half
};
struct NamedShape {
  std::string name;
  Shape shape;
  InitKind init = InitKind::zero;
};

// Deterministic initial tensor for one enumerated slot (seeded per name,
// values float32-representable).
Tensor init_tensor(const NamedShape& ns, uint64_t seed);
std::vector<NamedShape> param_shapes(const RtmConfig& cfg);
std::vector<NamedShape> param_shapes(const BaselineMlpConfig& cfg);

int64_t parameter_count(const RtmConfig& cfg);
int64_t parameter_count(const BaselineMlpConfig& cfg);

RtmParams init_rtm_params(const RtmConfig& cfg, uint64_t seed);
MlpParams init_mlp_params(const BaselineMlpConfig& cfg, uint64_t seed);

// Name -> tensor handles in param_shapes order (handles share storage with
// the params object, so optimizer updates are visible everywhere).
std::vector<std::pair<std::string, Tensor>> named_tensors(const RtmConfig& cfg, RtmParams& p);
std::vector<std::pair<std::string, Tensor>> named_tensors(const BaselineMlpConfig& cfg,
                                                          MlpParams& p);

}  // namespace rtm
