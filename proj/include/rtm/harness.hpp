#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rtm/checkpoint.hpp"
#include "rtm/config.hpp"
#include "rtm/imle.hpp"
#include "rtm/metrics.hpp"

// Command layer: every CLI verb is a function here, so tests and the
// acceptance harness drive the exact code paths the binary does. Each run
// lives in <out>/<digest16>-seed<seed>/ and all tables are CSV with a
// header row.

namespace rtm {

std::string run_dir_name(const ExperimentConfig& cfg, uint64_t seed);

struct TrainOutput {
  std::string run_dir;
  std::string checkpoint_path;  // run_dir + "/checkpoint.bin"
  std::string history_path;     // run_dir + "/history.csv"
  TrainResult result;
};

// Trains per cfg (resuming from `resume_path` when given), writes
// history.csv (columns step,loss,mean_matched_distance,pool_acceptance_rate)
// and the final checkpoint. On a numeric abort the checkpoint still holds
// the last completed step.
TrainOutput cmd_train(const ExperimentConfig& cfg, const std::string& out_dir,
                      std::optional<std::string> resume_path = {}, const RefreshHook& hook = {});

struct EvalOutput {
  MetricReport report;
  std::string metrics_path;  // run_dir + "/metrics.csv"
};

// Loads the checkpoint (config digest must match), samples cfg.metrics.n_fake
// latents from the run seed's "eval" stream, decodes with the EMA weights at
// the optional refinement-step override, and scores against the dataset.
EvalOutput cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                    std::optional<int64_t> h_override, const std::string& out_dir);

struct SweepRow {
  int64_t H = 0;
  MetricReport report;
};

// cmd_eval once per H value over identical eval latents; writes sweep.csv.
std::vector<SweepRow> cmd_sweep_h(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                                  const std::string& out_dir,
                                  std::vector<int64_t> h_values = {8, 16, 32, 64});

struct AblateRow {
  std::string variant;
  int64_t parameter_count = 0;
  int64_t sequential_depth = 0;  // shared-block applications (MLP: layers)
  double final_loss = 0.0;
  MetricReport report;
};

// Depth study: a recursive mapper at H=16, L=1 against feedforward baselines
// of depth 2, 16 and 32 at matched width, all trained with the same data,
// steps and optimizer; writes ablate.csv.
std::vector<AblateRow> cmd_ablate_depth(const ExperimentConfig& base, const std::string& out_dir);

struct LemmaOutput {
  LemmaReport report;
  double eps = 0.0;
  std::string table_path;    // lemma.csv: m,empirical,bound,std_err
  std::string summary_path;  // lemma_summary.csv: q_hat,eps,trials,q_draws,inconclusive
};

// Single-target coverage experiment on a fixed affine stub generator
// (A = [[0.6, 0.2], [-0.1, 0.8]], c = (0.3, -0.2), target = c), with eps
// calibrated so the per-draw hit probability is about 0.1.
LemmaOutput cmd_lemma_lab(uint64_t seed, const std::string& out_dir,
                          std::vector<int64_t> m_list = {1, 5, 10, 25, 50, 100},
                          int64_t trials = 2000, int64_t q_draws = 200000);

struct BenchReport {
  int64_t batch = 0;
  int64_t passes = 0;
  int64_t warmup = 0;
  double median_batch_seconds = 0.0;
  double per_image_seconds = 0.0;  // median batch time / batch
  int64_t block_evals_per_sample = 0;
  std::string table_path;  // bench.csv
};

BenchReport cmd_bench(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                      const std::string& out_dir, int64_t batch = 64, int64_t passes = 200,
                      int64_t warmup = 20);

// Writes the dataset as CSV (x0..x{dim-1},label; %.17g) and returns the path.
std::string cmd_gen_data(const DatasetSpec& spec, const std::string& out_dir);

}  // namespace rtm
