#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rtm/config.hpp"
#include "rtm/harness.hpp"

namespace {

void print_report(const rtm::MetricReport& r) {
  std::printf("precision=%.4f recall=%.4f density=%.4f coverage=%.4f fid=%.6g", r.precision,
              r.recall, r.density, r.coverage, r.fid);
  if (r.modes_covered >= 0) std::printf(" modes_covered=%lld", static_cast<long long>(r.modes_covered));
  std::printf(" (k=%lld, %lld real vs %lld fake)\n", static_cast<long long>(r.k),
              static_cast<long long>(r.n_real), static_cast<long long>(r.n_fake));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rtmlab: recursive-token-mapper generative lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::string checkpoint_path;
  std::string out_dir = "runs";
  std::optional<uint64_t> seed;
  std::optional<int64_t> h_override;

  auto add_common = [&](CLI::App* cmd, bool needs_config, bool needs_checkpoint) {
    if (needs_config)
      cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
    if (needs_checkpoint)
      cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    cmd->add_option("--seed", seed, "override the run seed");
    cmd->add_option("--out", out_dir, "output directory (default: runs)");
  };

  CLI::App* cmd_train = app.add_subcommand("train", "train a generator");
  add_common(cmd_train, true, false);
  std::string resume_path;
  cmd_train->add_option("--checkpoint", resume_path, "resume from this checkpoint");

  CLI::App* cmd_eval = app.add_subcommand("eval", "score a checkpoint against its dataset");
  add_common(cmd_eval, true, true);
  cmd_eval->add_option("--h-override", h_override, "refinement steps at evaluation time");

  CLI::App* cmd_sweep = app.add_subcommand("sweep-h", "evaluate one checkpoint at several depths");
  add_common(cmd_sweep, true, true);

  CLI::App* cmd_ablate = app.add_subcommand("ablate-depth",
                                            "recursive vs feedforward depth study");
  add_common(cmd_ablate, true, false);

  CLI::App* cmd_lemma = app.add_subcommand("lemma-lab", "pool-size coverage experiment");
  add_common(cmd_lemma, false, false);

  CLI::App* cmd_bench = app.add_subcommand("bench", "sampling throughput of a checkpoint");
  add_common(cmd_bench, true, true);

  CLI::App* cmd_gen = app.add_subcommand("gen-data", "write the configured dataset as CSV");
  add_common(cmd_gen, true, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_train->parsed()) {
      rtm::ExperimentConfig cfg = rtm::load_config(config_path);
      if (seed) cfg.seed = *seed;
      std::optional<std::string> resume;
      if (!resume_path.empty()) resume = resume_path;
      rtm::TrainOutput out = rtm::cmd_train(cfg, out_dir, resume);
      if (out.result.abort_reason) {
        std::fprintf(stderr, "training aborted at step %lld: %s\n",
                     static_cast<long long>(out.result.state.step),
                     out.result.abort_reason->c_str());
        std::fprintf(stderr, "last good checkpoint: %s\n", out.checkpoint_path.c_str());
        return 1;
      }
      double last_loss =
          out.result.history.empty() ? 0.0 : out.result.history.back().loss;
      std::printf("trained to step %lld (loss %.6g)\ncheckpoint: %s\nhistory: %s\n",
                  static_cast<long long>(out.result.state.step), last_loss,
                  out.checkpoint_path.c_str(), out.history_path.c_str());
    } else if (cmd_eval->parsed()) {
      rtm::ExperimentConfig cfg = rtm::load_config(config_path);
      if (seed) cfg.seed = *seed;
      rtm::EvalOutput out = rtm::cmd_eval(cfg, checkpoint_path, h_override, out_dir);
      print_report(out.report);
      std::printf("table: %s\n", out.metrics_path.c_str());
    } else if (cmd_sweep->parsed()) {
      rtm::ExperimentConfig cfg = rtm::load_config(config_path);
      if (seed) cfg.seed = *seed;
      auto rows = rtm::cmd_sweep_h(cfg, checkpoint_path, out_dir);
      for (const rtm::SweepRow& row : rows) {
        std::printf("H=%-3lld ", static_cast<long long>(row.H));
        print_report(row.report);
      }
    } else if (cmd_ablate->parsed()) {
      rtm::ExperimentConfig cfg = rtm::load_config(config_path);
      if (seed) cfg.seed = *seed;
      auto rows = rtm::cmd_ablate_depth(cfg, out_dir);
      for (const rtm::AblateRow& row : rows) {
        std::printf("%-12s params=%-6lld depth=%-3lld final_loss=%.6g ", row.variant.c_str(),
                    static_cast<long long>(row.parameter_count),
                    static_cast<long long>(row.sequential_depth), row.final_loss);
        print_report(row.report);
      }
    } else if (cmd_lemma->parsed()) {
      rtm::LemmaOutput out = rtm::cmd_lemma_lab(seed.value_or(1), out_dir);
      std::printf("q_hat=%.5f eps=%.5f%s\n", out.report.q_hat, out.eps,
                  out.report.inconclusive ? " (inconclusive: q_hat = 0)" : "");
      for (const rtm::LemmaRow& row : out.report.rows)
        std::printf("m=%-4lld empirical=%.4f bound=%.4f std_err=%.4f\n",
                    static_cast<long long>(row.m), row.empirical, row.bound, row.std_err);
      std::printf("table: %s\n", out.table_path.c_str());
    } else if (cmd_bench->parsed()) {
      rtm::ExperimentConfig cfg = rtm::load_config(config_path);
      if (seed) cfg.seed = *seed;
      rtm::BenchReport report = rtm::cmd_bench(cfg, checkpoint_path, out_dir);
      std::printf("batch=%lld passes=%lld warmup=%lld median_batch=%.6fs per_sample=%.6gs",
                  static_cast<long long>(report.batch), static_cast<long long>(report.passes),
                  static_cast<long long>(report.warmup), report.median_batch_seconds,
                  report.per_image_seconds);
      if (report.block_evals_per_sample > 0)
        std::printf(" block_evals=%lld", static_cast<long long>(report.block_evals_per_sample));
      std::printf("\ntable: %s\n", report.table_path.c_str());
    } else if (cmd_gen->parsed()) {
      rtm::ExperimentConfig cfg = rtm::load_config(config_path);
      rtm::DatasetSpec spec = cfg.dataset;
      if (seed) spec.seed = *seed;
      std::string path = rtm::cmd_gen_data(spec, out_dir);
      std::printf("wrote %s\n", path.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
