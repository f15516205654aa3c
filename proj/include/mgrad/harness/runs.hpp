#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mgrad/harness/config.hpp"

namespace mgrad::harness {

/// One row of metrics.csv.
struct MetricsRecord {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string algorithm;
  std::string noise_mode;
  double p = 0.0;
  int epoch = 0;
  std::string split;  // meta-train | meta-val | abort
  double loss = 0.0;
  std::optional<double> metric;
};

inline constexpr const char* kMetricsHeader = "run_id,seed,algorithm,noise_mode,p,epoch,split,loss,metric";
inline constexpr const char* kReportHeader =
    "run_id,seed,algorithm,noise_mode,p,layers,split,episodes,best_epoch,best_val_loss,loss_mean,loss_ci95,"
    "metric_mean,metric_ci95,status";

/// Nine significant digits, fixed across platforms for a given value.
std::string format_real(double v);
std::string format_record(const MetricsRecord& r);

/// Noise actually applied by `meta`, as written to metrics rows. A rate of
/// zero leaves gradients untouched and is reported as "off" with p = 0;
/// an activation-dropout-only run is reported as "activation".
std::pair<std::string, double> effective_noise(const MetaConfig& meta);

struct TrainResult {
  ParamSet params;
  AlphaSet alpha;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  int epochs_run = 0;
  std::vector<MetricsRecord> records;
  std::string abort_reason;  // empty on success
};

/// Meta-trains from scratch. Writes `metrics.csv` and `best.ckpt` (the
/// best meta-validation initialization) into `out_dir`. A non-finite loss
/// flushes the rows so far plus an abort row and is then rethrown.
TrainResult train(const RunConfig& config, std::uint64_t seed, const std::filesystem::path& out_dir);

struct EvalReport {
  int episodes = 0;
  double loss_mean = 0.0;
  double loss_ci95 = 0.0;
  std::optional<double> metric_mean;
  std::optional<double> metric_ci95;
  std::string status = "ok";
};

/// Meta-test over `episodes` fresh tasks from the (possibly shifted) family.
/// Half-widths are 1.96 standard errors; a single episode reports 0 with a
/// degenerate-sample warning status.
EvalReport evaluate(const ParamSet& params, const AlphaSet& alpha, const RunConfig& config, std::uint64_t seed,
                    int episodes, bool cross_domain);

/// Checkpoints hold θ, plus "alpha/<name>" entries for MetaSGD.
ParamSet checkpoint_entries(const ParamSet& params, const AlphaSet& alpha, Algorithm algorithm);
std::pair<ParamSet, AlphaSet> split_checkpoint(const ParamSet& entries, const RunConfig& config);

struct ReportRow {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string algorithm;
  std::string noise_mode;
  double p = 0.0;
  std::string layers = "all";
  std::string split;
  int best_epoch = -1;
  std::optional<double> best_val_loss;
  EvalReport report;
};

std::string format_report_row(const ReportRow& row);

/// `eval`: loads a checkpoint, evaluates it and writes `report.csv` to
/// `out_dir`.
ReportRow cmd_eval(const std::filesystem::path& checkpoint, const RunConfig& config, std::uint64_t seed,
                   int episodes, bool cross_domain, const std::filesystem::path& out_dir);

/// Modes accepted by `sweep`: off, binary, gaussian, and activation (the
/// activation-dropout baseline at rate p).
struct SweepOptions {
  std::vector<double> p_list;
  std::vector<std::string> modes;
  int n_seeds = 1;
  int eval_episodes = 100;
};

/// Trains and evaluates every (mode, p, seed) cell into `out_dir/<run_id>/`
/// and writes `out_dir/report.csv`. Failed cells are recorded and skipped.
std::vector<ReportRow> cmd_sweep(const RunConfig& config, const SweepOptions& options,
                                 const std::filesystem::path& out_dir);

/// Selectors are "all", "none", or layer labels joined with '+'.
struct AblationOptions {
  std::vector<std::string> selectors;
  int n_seeds = 1;
  int eval_episodes = 100;
};

std::vector<ReportRow> cmd_ablate_layers(const RunConfig& config, const AblationOptions& options,
                                         const std::filesystem::path& out_dir);

}  // namespace mgrad::harness
