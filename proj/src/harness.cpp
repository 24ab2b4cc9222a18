#include "rtm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rtm/error.hpp"
#include "rtm/rng.hpp"

namespace rtm {

namespace {

namespace fs = std::filesystem;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_table(const std::string& path, const char* header, bool append = false) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  if (!append) out << header << "\n";
  return out;
}

void write_metric_columns(std::ofstream& out, const MetricReport& r) {
  out << r.k << "," << r.n_real << "," << r.n_fake << "," << fmt_double(r.precision) << ","
      << fmt_double(r.recall) << "," << fmt_double(r.density) << "," << fmt_double(r.coverage)
      << "," << fmt_double(r.fid) << "," << r.modes_covered;
}

constexpr const char* kMetricHeader =
    "k,n_real,n_fake,precision,recall,density,coverage,fid,modes_covered";

Matrix eval_latents(uint64_t seed, int64_t n, int64_t dim) {
  rng::Stream stream(seed, "eval");
  Matrix z(n, dim);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < dim; ++j)
      z.at(i, j) = static_cast<double>(static_cast<float>(
          stream.normal(static_cast<uint64_t>(i) * static_cast<uint64_t>(dim) +
                        static_cast<uint64_t>(j))));
  return z;
}

MetricReport score_against_dataset(const ExperimentConfig& cfg, const Dataset& real,
                                   const Matrix& fake) {
  if (has_mode_geometry(cfg.dataset)) {
    ModeGeometry geo = mode_geometry(cfg.dataset);
    return compute_metrics(real.samples, fake, static_cast<int>(cfg.metrics.k), geo.centers,
                           geo.radius);
  }
  return compute_metrics(real.samples, fake, static_cast<int>(cfg.metrics.k));
}

}  // namespace

std::string run_dir_name(const ExperimentConfig& cfg, uint64_t seed) {
  return digest_hex(config_digest(cfg), 8) + "-seed" + std::to_string(seed);
}

TrainOutput cmd_train(const ExperimentConfig& cfg, const std::string& out_dir,
                      std::optional<std::string> resume_path, const RefreshHook& hook) {
  cfg.validate();
  TrainOutput out;
  out.run_dir = (fs::path(out_dir) / run_dir_name(cfg, cfg.seed)).string();
  fs::create_directories(out.run_dir);
  out.checkpoint_path = (fs::path(out.run_dir) / "checkpoint.bin").string();
  out.history_path = (fs::path(out.run_dir) / "history.csv").string();

  std::optional<TrainState> resume;
  bool resumed = false;
  if (resume_path) {
    resume = unpack_train_state(cfg, load_checkpoint(*resume_path));
    resumed = true;
  }

  Dataset dataset = generate_dataset(cfg.dataset);
  out.result = train(cfg.generator, cfg.imle, dataset, cfg.seed, std::move(resume), hook);

  std::ofstream hist = open_table(out.history_path,
                                  "step,loss,mean_matched_distance,pool_acceptance_rate",
                                  /*append=*/resumed && fs::exists(out.history_path));
  for (const HistoryRow& row : out.result.history)
    hist << row.step << "," << fmt_double(row.loss) << ","
         << fmt_double(row.mean_matched_distance) << ","
         << fmt_double(row.pool_acceptance_rate) << "\n";
  hist.close();

  save_checkpoint(out.checkpoint_path, pack_train_state(cfg, out.result.state));
  return out;
}

EvalOutput cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                    std::optional<int64_t> h_override, const std::string& out_dir) {
  cfg.validate();
  TrainState st = unpack_train_state(cfg, load_checkpoint(checkpoint_path));
  Dataset real = generate_dataset(cfg.dataset);
  Matrix z = eval_latents(st.seed, cfg.metrics.n_fake, cfg.generator.latent_dim());
  Matrix fake = batch_generate(z, cfg.generator, st.ema, h_override);

  EvalOutput out;
  out.report = score_against_dataset(cfg, real, fake);

  std::string run_dir = (fs::path(out_dir) / run_dir_name(cfg, st.seed)).string();
  fs::create_directories(run_dir);
  out.metrics_path = (fs::path(run_dir) / "metrics.csv").string();
  std::ofstream table = open_table(out.metrics_path, kMetricHeader);
  write_metric_columns(table, out.report);
  table << "\n";
  return out;
}

std::vector<SweepRow> cmd_sweep_h(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                                  const std::string& out_dir, std::vector<int64_t> h_values) {
  cfg.validate();
  if (cfg.generator.mapper != MapperKind::rtm)
    throw ConfigError("mapper.kind: refinement-step sweep needs the recursive mapper");
  TrainState st = unpack_train_state(cfg, load_checkpoint(checkpoint_path));
  Dataset real = generate_dataset(cfg.dataset);
  Matrix z = eval_latents(st.seed, cfg.metrics.n_fake, cfg.generator.latent_dim());

  std::vector<SweepRow> rows;
  for (int64_t h : h_values) {
    Matrix fake = batch_generate(z, cfg.generator, st.ema, h);
    rows.push_back({h, score_against_dataset(cfg, real, fake)});
  }

  std::string run_dir = (fs::path(out_dir) / run_dir_name(cfg, st.seed)).string();
  fs::create_directories(run_dir);
  std::string path = (fs::path(run_dir) / "sweep.csv").string();
  std::ofstream table = open_table(path, "H,k,n_real,n_fake,precision,recall,density,coverage,"
                                         "fid,modes_covered");
  for (const SweepRow& row : rows) {
    table << row.H << ",";
    write_metric_columns(table, row.report);
    table << "\n";
  }
  return rows;
}

std::vector<AblateRow> cmd_ablate_depth(const ExperimentConfig& base, const std::string& out_dir) {
  base.validate();
  struct Variant {
    std::string name;
    MapperKind kind;
    int64_t a, b;  // rtm: H, L; mlp: depth, hidden
  };
  const int64_t width = base.generator.latent_dim();
  std::vector<Variant> variants = {
      {"rtm_h16_l1", MapperKind::rtm, 16, 1},
      {"mlp_depth2", MapperKind::baseline_mlp, 2, width},
      {"mlp_depth16", MapperKind::baseline_mlp, 16, width},
      {"mlp_depth32", MapperKind::baseline_mlp, 32, width},
  };

  std::vector<AblateRow> rows;
  for (const Variant& v : variants) {
    ExperimentConfig cfg = base;
    cfg.generator.mapper = v.kind;
    if (v.kind == MapperKind::rtm) {
      cfg.generator.rtm.H = v.a;
      cfg.generator.rtm.L = v.b;
    } else {
      cfg.generator.mlp.depth = v.a;
      cfg.generator.mlp.hidden = v.b;
    }
    TrainOutput t = cmd_train(cfg, out_dir);
    if (t.result.abort_reason)
      throw NumericError("ablate-depth: variant " + v.name +
                         " aborted: " + *t.result.abort_reason);
    EvalOutput e = cmd_eval(cfg, t.checkpoint_path, {}, out_dir);
    AblateRow row;
    row.variant = v.name;
    row.parameter_count = parameter_count(cfg.generator);
    row.sequential_depth = mapper_sequential_depth(cfg.generator);
    row.final_loss =
        t.result.history.empty() ? std::nan("") : t.result.history.back().loss;
    row.report = e.report;
    rows.push_back(row);
  }

  fs::create_directories(out_dir);
  std::string path = (fs::path(out_dir) / "ablate.csv").string();
  std::ofstream table =
      open_table(path, "variant,parameter_count,sequential_depth,final_loss,k,n_real,n_fake,"
                       "precision,recall,density,coverage,fid,modes_covered");
  for (const AblateRow& row : rows) {
    table << row.variant << "," << row.parameter_count << "," << row.sequential_depth << ","
          << fmt_double(row.final_loss) << ",";
    write_metric_columns(table, row.report);
    table << "\n";
  }
  return rows;
}

LemmaOutput cmd_lemma_lab(uint64_t seed, const std::string& out_dir, std::vector<int64_t> m_list,
                          int64_t trials, int64_t q_draws) {
  // Fixed affine stub: x = A z + c with target c, so hits are |A z| <= eps.
  StubGenerator stub = [](const double* z, double* x) {
    x[0] = 0.6 * z[0] + 0.2 * z[1] + 0.3;
    x[1] = -0.1 * z[0] + 0.8 * z[1] - 0.2;
  };
  const std::vector<double> target = {0.3, -0.2};

  LemmaOutput out;
  out.eps = calibrate_eps(stub, 2, 2, target, 0.1, q_draws, seed);
  out.report = coverage_lemma_mc(stub, 2, 2, target, out.eps, m_list, trials, seed, q_draws);

  fs::create_directories(out_dir);
  out.table_path = (fs::path(out_dir) / "lemma.csv").string();
  std::ofstream table = open_table(out.table_path, "m,empirical,bound,std_err");
  for (const LemmaRow& row : out.report.rows)
    table << row.m << "," << fmt_double(row.empirical) << "," << fmt_double(row.bound) << ","
          << fmt_double(row.std_err) << "\n";
  table.close();

  out.summary_path = (fs::path(out_dir) / "lemma_summary.csv").string();
  std::ofstream summary = open_table(out.summary_path, "q_hat,eps,trials,q_draws,inconclusive");
  summary << fmt_double(out.report.q_hat) << "," << fmt_double(out.eps) << ","
          << out.report.trials << "," << out.report.q_draws << ","
          << (out.report.inconclusive ? 1 : 0) << "\n";
  return out;
}

BenchReport cmd_bench(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                      const std::string& out_dir, int64_t batch, int64_t passes, int64_t warmup) {
  cfg.validate();
  if (batch < 1 || passes < 1 || warmup < 0)
    throw ConfigError("bench: batch and passes must be >= 1, warmup >= 0");
  TrainState st = unpack_train_state(cfg, load_checkpoint(checkpoint_path));
  Matrix z = eval_latents(st.seed, batch, cfg.generator.latent_dim());

  using clock = std::chrono::steady_clock;
  std::vector<double> seconds;
  seconds.reserve(static_cast<size_t>(passes));
  for (int64_t p = 0; p < warmup + passes; ++p) {
    auto t0 = clock::now();
    Matrix fake = batch_generate(z, cfg.generator, st.ema);
    auto t1 = clock::now();
    if (fake.rows != batch) throw std::logic_error("bench: unexpected batch result");
    if (p >= warmup) seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(seconds.begin(), seconds.end());
  double median = seconds.size() % 2 == 1
                      ? seconds[seconds.size() / 2]
                      : 0.5 * (seconds[seconds.size() / 2 - 1] + seconds[seconds.size() / 2]);

  BenchReport report;
  report.batch = batch;
  report.passes = passes;
  report.warmup = warmup;
  report.median_batch_seconds = median;
  report.per_image_seconds = median / static_cast<double>(batch);
  if (cfg.generator.mapper == MapperKind::rtm)
    report.block_evals_per_sample = cfg.generator.rtm.H * (cfg.generator.rtm.L + 1);

  std::string run_dir = (fs::path(out_dir) / run_dir_name(cfg, st.seed)).string();
  fs::create_directories(run_dir);
  report.table_path = (fs::path(run_dir) / "bench.csv").string();
  std::ofstream table = open_table(report.table_path,
                                   "batch,passes,warmup,median_batch_seconds,per_image_seconds,"
                                   "block_evals_per_sample");
  table << report.batch << "," << report.passes << "," << report.warmup << ","
        << fmt_double(report.median_batch_seconds) << ","
        << fmt_double(report.per_image_seconds) << "," << report.block_evals_per_sample << "\n";
  return report;
}

std::string cmd_gen_data(const DatasetSpec& spec, const std::string& out_dir) {
  Dataset ds = generate_dataset(spec);
  fs::create_directories(out_dir);
  std::string path = (fs::path(out_dir) / (to_string(spec.kind) + "_seed" +
                                           std::to_string(spec.seed) + "_n" +
                                           std::to_string(spec.n) + ".csv"))
                         .string();
  std::string header;
  for (int64_t j = 0; j < ds.samples.cols; ++j) header += "x" + std::to_string(j) + ",";
  header += "label";
  std::ofstream table = open_table(path, header.c_str());
  for (int64_t i = 0; i < ds.samples.rows; ++i) {
    for (int64_t j = 0; j < ds.samples.cols; ++j) table << fmt_double(ds.samples.at(i, j)) << ",";
    table << ds.labels[static_cast<size_t>(i)] << "\n";
  }
  return path;
}

}  // namespace rtm
