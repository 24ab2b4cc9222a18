#include "rtm/imle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rtm/error.hpp"
#include "rtm/kernels.hpp"
#include "rtm/rng.hpp"

namespace rtm {

namespace {

double round_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

int64_t percentile_index(double quantile, int64_t count) {
  int64_t idx = static_cast<int64_t>(std::ceil(quantile * static_cast<double>(count))) - 1;
  if (idx < 0) idx = 0;
  if (idx > count - 1) idx = count - 1;
  return idx;
}

}  // namespace

void ImleHyper::validate() const {
  if (pool_size < 0)
    throw ConfigError("imle.pool_size: must be >= 0 (0 = auto), got " + std::to_string(pool_size));
  if (eps_reject >= 0.0 && !std::isfinite(eps_reject))
    throw ConfigError("imle.eps_reject: must be finite or negative (auto)");
  if (refresh_period < 1)
    throw ConfigError("imle.refresh_period: must be >= 1, got " + std::to_string(refresh_period));
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("imle.lr: must be positive and finite");
  if (steps < 0) throw ConfigError("imle.steps: must be >= 0, got " + std::to_string(steps));
  if (!(ema_decay >= 0.0) || !(ema_decay < 1.0))
    throw ConfigError("imle.ema_decay: must be in [0, 1), got " + std::to_string(ema_decay));
  if (batch < 0)
    throw ConfigError("imle.batch: must be >= 0 (0 = auto), got " + std::to_string(batch));
  if (!(beta1 >= 0.0) || !(beta1 < 1.0)) throw ConfigError("imle.beta1: must be in [0, 1)");
  if (!(beta2 >= 0.0) || !(beta2 < 1.0)) throw ConfigError("imle.beta2: must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("imle.adam_eps: must be > 0");
}

Pool sample_pool(const GeneratorConfig& cfg, const GeneratorParams& params, int64_t m,
                 uint64_t seed, int64_t step) {
  if (m < 1) throw ConfigError("imle.pool_size: resolved pool size must be >= 1");
  const int64_t d = cfg.latent_dim();
  rng::Stream stream(seed, "pool", static_cast<uint64_t>(step));
  Pool pool;
  pool.latents = Matrix(m, d);
  for (int64_t p = 0; p < m; ++p)
    for (int64_t j = 0; j < d; ++j)
      pool.latents.at(p, j) =
          round_f32(stream.normal(static_cast<uint64_t>(p) * static_cast<uint64_t>(d) +
                                  static_cast<uint64_t>(j)));
  pool.samples = batch_generate(pool.latents, cfg, params);
  return pool;
}

double auto_eps_sq(const Matrix& data) {
  if (data.rows < 2) throw ShapeError("auto_eps_sq: need at least 2 data points");
  Matrix d = kern::pairwise_sqdist(data, data);
  std::vector<double> upper;
  upper.reserve(static_cast<size_t>(data.rows) * (data.rows - 1) / 2);
  for (int64_t i = 0; i < data.rows; ++i)
    for (int64_t j = i + 1; j < data.rows; ++j) upper.push_back(d.at(i, j));
  std::sort(upper.begin(), upper.end());
  return upper[static_cast<size_t>(percentile_index(0.05, static_cast<int64_t>(upper.size())))];
}

std::vector<int64_t> rs_reject(const Matrix& data, const Pool& pool, double eps_sq) {
  Matrix d = kern::pairwise_sqdist(pool.samples, data);
  std::vector<int64_t> accepted;
  for (int64_t p = 0; p < pool.samples.rows; ++p) {
    const double* row = d.row(p);
    double min_sq = std::numeric_limits<double>::infinity();
    for (int64_t i = 0; i < data.rows; ++i)
      if (row[i] < min_sq) min_sq = row[i];
    if (min_sq >= eps_sq) accepted.push_back(p);
  }
  return accepted;
}

std::vector<Assignment> match(const Matrix& data, const Pool& pool,
                              const std::vector<int64_t>& accepted) {
  if (accepted.empty())
    throw MatchError("match: rejection left 0 of " + std::to_string(pool.samples.rows) +
                     " pool samples; lower imle.eps_reject or enlarge imle.pool_size");
  Matrix d = kern::pairwise_sqdist(data, pool.samples);
  std::vector<Assignment> out(static_cast<size_t>(data.rows));
  for (int64_t i = 0; i < data.rows; ++i) {
    const double* row = d.row(i);
    int64_t best = -1;
    double best_sq = std::numeric_limits<double>::infinity();
    // accepted is ascending and the comparison strict, so ties keep the
    // lowest pool index.
    for (int64_t p : accepted) {
      if (row[p] < best_sq) {
        best_sq = row[p];
        best = p;
      }
    }
    out[static_cast<size_t>(i)] = {best, round_f32(std::sqrt(best_sq))};
  }
  return out;
}

Tensor imle_loss(const std::vector<Tensor>& outputs, const std::vector<Tensor>& targets) {
  if (outputs.empty()) throw ShapeError("imle_loss: empty batch");
  if (outputs.size() != targets.size())
    throw ShapeError("imle_loss: " + std::to_string(outputs.size()) + " outputs vs " +
                     std::to_string(targets.size()) + " targets");
  const int64_t dim = outputs[0].numel();
  Tensor acc;
  for (size_t b = 0; b < outputs.size(); ++b) {
    if (outputs[b].shape() != targets[b].shape())
      throw ShapeError("imle_loss: output/target shape mismatch at pair " + std::to_string(b));
    if (outputs[b].numel() != dim)
      throw ShapeError("imle_loss: inconsistent sample width at pair " + std::to_string(b));
    Tensor diff = sub(outputs[b], targets[b]);
    Tensor sq_sum = sum_all(mul(diff, diff));
    acc = (b == 0) ? sq_sum : add(acc, sq_sum);
  }
  return scale(acc, 1.0 / (static_cast<double>(outputs.size()) * static_cast<double>(dim)));
}

AdamState init_adam(const ParamRegistry& params) {
  AdamState s;
  s.t = 0;
  for (const auto& [name, tensor] : params) {
    (void)name;
    s.m.push_back(Tensor::zeros(tensor.shape()));
    s.v.push_back(Tensor::zeros(tensor.shape()));
  }
  return s;
}

void adam_step(ParamRegistry& params, const std::vector<std::vector<double>>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
  if (grads.size() != params.size())
    throw ShapeError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw ShapeError("adam_step: optimizer state size mismatch");
  // Validate everything before mutating anything: a thrown step must leave
  // params and moments untouched.
  for (size_t i = 0; i < params.size(); ++i) {
    if (static_cast<int64_t>(grads[i].size()) != params[i].second.numel())
      throw ShapeError("adam_step: gradient size mismatch for " + params[i].first);
    for (double g : grads[i])
      if (!std::isfinite(g))
        throw NumericError("adam_step: non-finite gradient for " + params[i].first);
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    std::vector<double>& p = params[i].second.values();
    std::vector<double>& m = state.m[i].values();
    std::vector<double>& v = state.v[i].values();
    const std::vector<double>& g = grads[i];
    for (size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
      p[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
    }
    round_to_float32(params[i].second);
    round_to_float32(state.m[i]);
    round_to_float32(state.v[i]);
  }
}

void ema_update(ParamRegistry& shadow, const ParamRegistry& params, double decay) {
  if (shadow.size() != params.size()) throw ShapeError("ema_update: registry size mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    std::vector<double>& s = shadow[i].second.values();
    const std::vector<double>& p = params[i].second.values();
    if (s.size() != p.size()) throw ShapeError("ema_update: size mismatch for " + params[i].first);
    for (size_t j = 0; j < s.size(); ++j) s[j] = decay * s[j] + (1.0 - decay) * p[j];
    round_to_float32(shadow[i].second);
  }
}

TrainResult train(const GeneratorConfig& cfg, const ImleHyper& hyper, const Dataset& dataset,
                  uint64_t seed, std::optional<TrainState> resume, const RefreshHook& hook) {
  cfg.validate();
  hyper.validate();
  if (dataset.samples.rows < 1) throw ShapeError("train: empty dataset");
  if (dataset.samples.cols != cfg.sample_dim())
    throw ShapeError("train: dataset width " + std::to_string(dataset.samples.cols) +
                     " != generator sample width " + std::to_string(cfg.sample_dim()));

  const int64_t n = dataset.samples.rows;
  const int64_t pool_m = hyper.resolved_pool_size(n);
  const int64_t batch_n = hyper.resolved_batch(n);
  const double eps_sq =
      hyper.eps_reject < 0.0 ? auto_eps_sq(dataset.samples) : hyper.eps_reject * hyper.eps_reject;

  TrainResult result;
  if (resume) {
    result.state = std::move(*resume);
    if (result.state.step > hyper.steps)
      throw ConfigError("imle.steps: resume step " + std::to_string(result.state.step) +
                        " is past the requested " + std::to_string(hyper.steps));
  } else {
    result.state.cfg = cfg;
    result.state.params = init_generator(cfg, seed);
    result.state.ema = clone_params(cfg, result.state.params);
    result.state.seed = seed;
    result.state.step = 0;
  }
  TrainState& st = result.state;

  ParamRegistry registry = collect_params(cfg, st.params);
  ParamRegistry ema_registry = collect_params(cfg, st.ema);
  for (auto& [name, tensor] : registry) {
    (void)name;
    tensor.set_requires_grad(true);
  }
  if (!resume) {
    st.opt = init_adam(registry);
  } else if (st.opt.t != st.step) {
    throw ConfigError("checkpoint: optimizer step " + std::to_string(st.opt.t) +
                      " != trainer step " + std::to_string(st.step));
  }

  // Targets are constant; build the tensor views once.
  const Shape sshape = cfg.sample_shape();
  std::vector<Tensor> targets;
  targets.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    targets.push_back(Tensor::from_values(
        sshape, std::vector<double>(dataset.samples.row(i), dataset.samples.row(i) + dataset.samples.cols)));

  for (int64_t t = st.step; t < hyper.steps; ++t) {
    try {
      if (t % hyper.refresh_period == 0) {
        Pool pool = sample_pool(cfg, st.params, pool_m, st.seed, t);
        std::vector<int64_t> accepted = rs_reject(dataset.samples, pool, eps_sq);
        std::vector<Assignment> assignment = match(dataset.samples, pool, accepted);
        st.matched_latents = Matrix(n, cfg.latent_dim());
        st.matched_distance.resize(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) {
          const Assignment& a = assignment[static_cast<size_t>(i)];
          for (int64_t j = 0; j < cfg.latent_dim(); ++j)
            st.matched_latents.at(i, j) = pool.latents.at(a.pool_index, j);
          st.matched_distance[static_cast<size_t>(i)] = a.distance;
        }
        st.accepted_count = static_cast<int64_t>(accepted.size());
        if (hook) hook(RefreshInfo{t, pool, accepted, eps_sq, assignment});
      }

      std::vector<int64_t> batch_idx;
      if (batch_n >= n) {
        batch_idx.resize(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) batch_idx[static_cast<size_t>(i)] = i;
      } else {
        rng::Stream bstream(st.seed, "batch", static_cast<uint64_t>(t));
        batch_idx = rng::sample_without_replacement(bstream, n, batch_n);
      }

      Tape tape;
      double loss_value;
      {
        TapeScope scope(tape);
        std::vector<Tensor> outputs;
        std::vector<Tensor> batch_targets;
        outputs.reserve(batch_idx.size());
        batch_targets.reserve(batch_idx.size());
        for (int64_t idx : batch_idx) {
          Tensor z = Tensor::from_row(st.matched_latents, idx);
          outputs.push_back(generate_one(z, cfg, st.params).sample);
          batch_targets.push_back(targets[static_cast<size_t>(idx)]);
        }
        Tensor loss = imle_loss(outputs, batch_targets);
        loss_value = loss.item();
        if (!std::isfinite(loss_value)) throw NumericError("train: non-finite loss");
        backward(loss);
      }

      std::vector<std::vector<double>> grads;
      grads.reserve(registry.size());
      for (auto& [name, tensor] : registry) {
        (void)name;
        grads.push_back(tensor.grad());
      }
      adam_step(registry, grads, st.opt, hyper.lr, hyper.beta1, hyper.beta2, hyper.adam_eps);
      ema_update(ema_registry, registry, hyper.ema_decay);

      double mean_dist = 0.0;
      for (double dist : st.matched_distance) mean_dist += dist;
      mean_dist /= static_cast<double>(st.matched_distance.size());
      result.history.push_back({t + 1, loss_value, mean_dist,
                                static_cast<double>(st.accepted_count) /
                                    static_cast<double>(pool_m)});
      st.step = t + 1;
    } catch (const NumericError& e) {
      result.abort_reason = e.what();
      break;
    } catch (const MatchError& e) {
      result.abort_reason = e.what();
      break;
    }
  }
  return result;
}

// ----- coverage lemma Monte Carlo -----

namespace {

double stub_sqdist_to_target(const StubGenerator& gen, const double* z,
                             const std::vector<double>& target, std::vector<double>& scratch) {
  gen(z, scratch.data());
  double acc = 0.0;
  for (size_t j = 0; j < target.size(); ++j) {
    double diff = scratch[j] - target[j];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

double calibrate_eps(const StubGenerator& gen, int64_t latent_dim, int64_t sample_dim,
                     const std::vector<double>& target, double quantile, int64_t draws,
                     uint64_t seed) {
  if (static_cast<int64_t>(target.size()) != sample_dim)
    throw ShapeError("calibrate_eps: target size mismatch");
  if (draws < 1) throw ConfigError("lemma: calibration draws must be >= 1");
  if (!(quantile > 0.0) || !(quantile <= 1.0))
    throw ConfigError("lemma: quantile must be in (0, 1]");
  rng::Stream stream(seed, "lemma-calibrate");
  std::vector<double> z(static_cast<size_t>(latent_dim));
  std::vector<double> x(static_cast<size_t>(sample_dim));
  std::vector<double> dists(static_cast<size_t>(draws));
  for (int64_t i = 0; i < draws; ++i) {
    for (int64_t j = 0; j < latent_dim; ++j)
      z[static_cast<size_t>(j)] = stream.normal(static_cast<uint64_t>(i) *
                                                    static_cast<uint64_t>(latent_dim) +
                                                static_cast<uint64_t>(j));
    dists[static_cast<size_t>(i)] = std::sqrt(stub_sqdist_to_target(gen, z.data(), target, x));
  }
  std::sort(dists.begin(), dists.end());
  return dists[static_cast<size_t>(percentile_index(quantile, draws))];
}

LemmaReport coverage_lemma_mc(const StubGenerator& gen, int64_t latent_dim, int64_t sample_dim,
                              const std::vector<double>& target, double eps,
                              const std::vector<int64_t>& m_list, int64_t trials, uint64_t seed,
                              int64_t q_draws) {
  if (static_cast<int64_t>(target.size()) != sample_dim)
    throw ShapeError("coverage_lemma_mc: target size mismatch");
  if (trials < 1 || q_draws < 1) throw ConfigError("lemma: trials and q_draws must be >= 1");
  const double eps_sq = eps * eps;

  LemmaReport report;
  report.q_draws = q_draws;
  report.trials = trials;

  std::vector<double> z(static_cast<size_t>(latent_dim));
  std::vector<double> x(static_cast<size_t>(sample_dim));
  {
    rng::Stream qstream(seed, "lemma-q");
    int64_t hits = 0;
    for (int64_t i = 0; i < q_draws; ++i) {
      for (int64_t j = 0; j < latent_dim; ++j)
        z[static_cast<size_t>(j)] = qstream.normal(static_cast<uint64_t>(i) *
                                                       static_cast<uint64_t>(latent_dim) +
                                                   static_cast<uint64_t>(j));
      if (stub_sqdist_to_target(gen, z.data(), target, x) <= eps_sq) ++hits;
    }
    report.q_hat = static_cast<double>(hits) / static_cast<double>(q_draws);
  }
  report.inconclusive = (report.q_hat == 0.0);

  for (int64_t m : m_list) {
    if (m < 1) throw ConfigError("lemma: pool sizes must be >= 1");
    rng::Stream pstream(seed, "lemma-pool", static_cast<uint64_t>(m));
    int64_t failures = 0;
    for (int64_t trial = 0; trial < trials; ++trial) {
      bool hit = false;
      for (int64_t r = 0; r < m && !hit; ++r) {
        uint64_t base = (static_cast<uint64_t>(trial) * static_cast<uint64_t>(m) +
                         static_cast<uint64_t>(r)) *
                        static_cast<uint64_t>(latent_dim);
        for (int64_t j = 0; j < latent_dim; ++j)
          z[static_cast<size_t>(j)] = pstream.normal(base + static_cast<uint64_t>(j));
        hit = stub_sqdist_to_target(gen, z.data(), target, x) <= eps_sq;
      }
      if (!hit) ++failures;
    }
    LemmaRow row;
    row.m = m;
    row.empirical = static_cast<double>(failures) / static_cast<double>(trials);
    row.bound = std::pow(1.0 - report.q_hat, static_cast<double>(m));
    row.std_err = std::sqrt(row.empirical * (1.0 - row.empirical) / static_cast<double>(trials));
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace rtm
