#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rtm/data.hpp"
#include "rtm/generator.hpp"
#include "rtm/matrix.hpp"
#include "rtm/tensor.hpp"

// Implicit maximum-likelihood training with rejection sampling: each refresh
// draws a fresh latent pool, rejects pool samples that sit closer to the
// dataset than the rejection threshold, matches every data point to its
// nearest accepted pool sample, then optimizes MSE between the generator's
// output at the matched latents and the data until the next refresh.
//
// Distances live in squared space end to end (thresholds included), so
// acceptance checks can be replayed exactly.

namespace rtm {

struct ImleHyper {
  int64_t pool_size = 0;      // 0 => 20 * dataset size
  double eps_reject = -1.0;   // Euclidean; < 0 => 5th-percentile pairwise data distance
  int64_t refresh_period = 50;
  double lr = 1e-3;
  int64_t steps = 5000;
  double ema_decay = 0.999;
  int64_t batch = 0;          // 0 => full batch if n <= 256, else 64
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  int64_t resolved_pool_size(int64_t n) const { return pool_size > 0 ? pool_size : 20 * n; }
  int64_t resolved_batch(int64_t n) const {
    if (batch > 0) return batch < n ? batch : n;
    return n <= 256 ? n : 64;
  }
};

struct Pool {
  Matrix latents;  // m x latent_dim, float32-quantized at sampling time
  Matrix samples;  // m x sample_dim; identity feature map, so also the features
};

// Latents keyed by (seed, "pool", step); samples from the current params.
Pool sample_pool(const GeneratorConfig& cfg, const GeneratorParams& params, int64_t m,
                 uint64_t seed, int64_t step);

// Squared 5th-percentile of the n(n-1)/2 pairwise squared data distances:
// sorted ascending, index clamp(ceil(0.05*count)-1, 0, count-1).
double auto_eps_sq(const Matrix& data);

// Indices (ascending) of pool samples whose squared distance to every data
// point is >= eps_sq.
std::vector<int64_t> rs_reject(const Matrix& data, const Pool& pool, double eps_sq);

struct Assignment {
  int64_t pool_index = -1;
  double distance = 0.0;  // Euclidean, float32-rounded
};

// Nearest accepted pool sample per data point; ties resolve to the lowest
// pool index. Throws MatchError when `accepted` is empty.
std::vector<Assignment> match(const Matrix& data, const Pool& pool,
                              const std::vector<int64_t>& accepted);

// Mean squared error over all coordinates of all pairs: requires matching
// shapes and at least one pair.
Tensor imle_loss(const std::vector<Tensor>& outputs, const std::vector<Tensor>& targets);

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  int64_t t = 0;
};

AdamState init_adam(const ParamRegistry& params);

// Bias-corrected Adam over the registry. Validates every gradient finite
// before touching any state (transactional), then updates and rounds params
// and moments to float32.
void adam_step(ParamRegistry& params, const std::vector<std::vector<double>>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps);

// shadow <- decay * shadow + (1 - decay) * param, float32-rounded.
void ema_update(ParamRegistry& shadow, const ParamRegistry& params, double decay);

struct TrainState {
  GeneratorConfig cfg;
  GeneratorParams params;
  GeneratorParams ema;
  AdamState opt;
  int64_t step = 0;
  uint64_t seed = 0;
  // Matching carried between refreshes; checkpointing these makes resume
  // exact from any step, not just refresh boundaries.
  Matrix matched_latents;
  std::vector<double> matched_distance;
  int64_t accepted_count = 0;
};

struct HistoryRow {
  int64_t step = 0;
  double loss = 0.0;
  double mean_matched_distance = 0.0;
  double pool_acceptance_rate = 0.0;
};

struct RefreshInfo {
  int64_t step = 0;
  const Pool& pool;
  const std::vector<int64_t>& accepted;
  double eps_sq = 0.0;
  const std::vector<Assignment>& assignment;
};

using RefreshHook = std::function<void(const RefreshInfo&)>;

struct TrainResult {
  TrainState state;
  std::vector<HistoryRow> history;
  std::optional<std::string> abort_reason;
};

TrainResult train(const GeneratorConfig& cfg, const ImleHyper& hyper, const Dataset& dataset,
                  uint64_t seed, std::optional<TrainState> resume = {},
                  const RefreshHook& hook = {});

// ----- coverage lemma Monte Carlo -----

// Maps a latent_dim vector to a sample_dim vector; must be deterministic.
using StubGenerator = std::function<void(const double* z, double* x)>;

// Distance whose hit probability under z ~ N(0, I) is approximately
// `quantile`: the quantile-th order statistic of |G(z) - target| over
// `draws` calibration draws.
double calibrate_eps(const StubGenerator& gen, int64_t latent_dim, int64_t sample_dim,
                     const std::vector<double>& target, double quantile, int64_t draws,
                     uint64_t seed);

struct LemmaRow {
  int64_t m = 0;
  double empirical = 0.0;  // observed failure rate over `trials` pools
  double bound = 0.0;      // (1 - q_hat)^m
  double std_err = 0.0;    // sqrt(empirical * (1 - empirical) / trials)
};

struct LemmaReport {
  double q_hat = 0.0;
  int64_t q_draws = 0;
  int64_t trials = 0;
  bool inconclusive = false;  // q_hat == 0: the bound degenerates to 1
  std::vector<LemmaRow> rows;
};

// Failure probability of covering `target` within eps by the best of m iid
// generator draws, measured empirically and predicted as (1 - q_hat)^m.
LemmaReport coverage_lemma_mc(const StubGenerator& gen, int64_t latent_dim, int64_t sample_dim,
                              const std::vector<double>& target, double eps,
                              const std::vector<int64_t>& m_list, int64_t trials, uint64_t seed,
                              int64_t q_draws = 200000);

}  // namespace rtm
