#include "mgrad/harness/runs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <tuple>

namespace mgrad::harness {

namespace fs = std::filesystem;

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string format_record(const MetricsRecord& r) {
  std::string line = r.run_id + ',' + std::to_string(r.seed) + ',' + r.algorithm + ',' + r.noise_mode + ',' +
                     format_real(r.p) + ',' + std::to_string(r.epoch) + ',' + r.split + ',' + format_real(r.loss) +
                     ',';
  if (r.metric) line += format_real(*r.metric);
  return line;
}

std::pair<std::string, double> effective_noise(const MetaConfig& meta) {
  if (meta.noise.active() && meta.noise.p > 0.0) return {noise_mode_name(meta.noise.mode), meta.noise.p};
  if (meta.activation_dropout > 0.0) return {"activation", meta.activation_dropout};
  return {"off", 0.0};
}

namespace {

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

std::string layers_string(const NoiseConfig& noise) {
  if (noise.layers.empty()) return "all";
  std::string out;
  for (const auto& l : noise.layers) {
    if (!out.empty()) out += '+';
    out += l;
  }
  return out;
}

struct ValScore {
  double loss = 0.0;
  std::optional<double> metric;
};

ValScore score(const std::vector<Task>& tasks, const ParamSet& params, const AlphaSet& alpha, const MetaConfig& meta,
               const MlpSpec& spec) {
  ValScore s;
  double acc = 0.0;
  for (const auto& t : tasks) {
    EvalResult r = meta_test_adapt(params, alpha, t, meta, spec);
    s.loss += r.loss;
    if (r.accuracy) acc += *r.accuracy;
  }
  s.loss /= static_cast<double>(tasks.size());
  if (spec.head == Head::Classification) s.metric = acc / static_cast<double>(tasks.size());
  if (!std::isfinite(s.loss)) throw NonFiniteError("non-finite meta-validation loss");
  return s;
}

void write_report(const fs::path& path, const std::vector<ReportRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << kReportHeader << '\n';
  for (const auto& r : rows) out << format_report_row(r) << '\n';
}

}  // namespace

ParamSet checkpoint_entries(const ParamSet& params, const AlphaSet& alpha, Algorithm algorithm) {
  ParamSet out = params;
  if (algorithm == Algorithm::MetaSgd) {
    for (const auto& e : alpha) out.add("alpha/" + e.name, e.layer, e.value);
  }
  return out;
}

std::pair<ParamSet, AlphaSet> split_checkpoint(const ParamSet& entries, const RunConfig& config) {
  ParamSet params;
  AlphaSet alpha;
  for (const auto& e : entries) {
    if (e.name.rfind("alpha/", 0) == 0) {
      alpha.add(e.name.substr(6), e.layer, e.value);
    } else {
      params.add(e.name, e.layer, e.value);
    }
  }
  const MlpSpec spec = config.mlp_spec();
  check_layout(params, spec);
  if (config.meta.algorithm == Algorithm::MetaSgd) {
    if (!alpha.congruent(params)) throw CheckpointError("checkpoint: MetaSGD learning rates missing or mis-shaped");
  } else {
    if (!alpha.empty()) throw CheckpointError("checkpoint: holds learned rates but algorithm is not metasgd");
    alpha = make_alpha(params, config.meta.alpha0);
  }
  return {std::move(params), std::move(alpha)};
}

TrainResult train(const RunConfig& config, std::uint64_t seed, const fs::path& out_dir) {
  config.validate();
  const MlpSpec spec = config.mlp_spec();
  const TaskFamily family = config.task_family();
  const MetaConfig& meta = config.meta;

  const RngStream root(seed);
  RngStream init_rng = root.substream("init");
  TrainResult result;
  result.params = init_mlp(spec, init_rng);
  result.alpha = make_alpha(result.params, meta.alpha0);

  std::optional<TaskPool> pool;
  if (config.n_pool > 0) {
    RngStream pool_rng = root.substream("pool");
    pool = make_pool(family, config.n_pool, pool_rng);
  }
  std::vector<Task> val_tasks;
  const RngStream val_rng = root.substream("eval").substream("val");
  for (int i = 0; i < config.n_val_tasks; ++i) {
    RngStream rng = val_rng.substream("task-" + std::to_string(i));
    val_tasks.push_back(sample_task(family, config.k_shot, config.n_query, rng, false));
  }
  const RngStream sampling = root.substream("task-sampling");
  const RngStream noise = root.substream("noise");
  const RngStream dropout = root.substream("activation-dropout");

  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "metrics.csv", std::ios::binary);
  if (!csv) throw Error("cannot write " + (out_dir / "metrics.csv").string());
  csv << kMetricsHeader << '\n';

  const auto [mode_label, p_label] = effective_noise(meta);
  auto emit = [&](int epoch, const std::string& split, double loss, std::optional<double> metric) {
    MetricsRecord r{config.run_id, seed, algorithm_name(meta.algorithm), mode_label, p_label, epoch, split, loss,
                    metric};
    csv << format_record(r) << '\n';
    result.records.push_back(std::move(r));
  };

  ParamSet params = result.params;
  AlphaSet alpha = result.alpha;
  OptimizerState state;
  int epoch = 0;
  try {
    ValScore v = score(val_tasks, params, alpha, meta, spec);
    emit(0, "meta-val", v.loss, v.metric);
    result.best_val_loss = v.loss;
    int stale = 0;
    for (epoch = 1; epoch <= config.epochs; ++epoch) {
      double train_loss = 0.0;
      for (int e = 0; e < config.episodes_per_epoch; ++e) {
        const long step = static_cast<long>(epoch - 1) * config.episodes_per_epoch + e;
        const std::string step_name = "step-" + std::to_string(step);
        const RngStream step_sampling = sampling.substream(step_name);
        std::vector<Task> tasks;
        for (int j = 0; j < meta.meta_batch; ++j) {
          RngStream rng = step_sampling.substream("task-" + std::to_string(j));
          tasks.push_back(pool ? sample_from_pool(*pool, config.k_shot, config.n_query, rng)
                               : sample_task(family, config.k_shot, config.n_query, rng, false));
        }
        MetaStepResult r =
            meta_step(params, alpha, tasks, meta, spec, noise.substream(step_name), dropout.substream(step_name), state);
        params = std::move(r.params);
        alpha = std::move(r.alpha);
        state = std::move(r.state);
        train_loss += r.mean_query_loss;
      }
      emit(epoch, "meta-train", train_loss / config.episodes_per_epoch, std::nullopt);
      v = score(val_tasks, params, alpha, meta, spec);
      emit(epoch, "meta-val", v.loss, v.metric);
      result.epochs_run = epoch;
      if (v.loss < result.best_val_loss) {
        result.best_val_loss = v.loss;
        result.best_epoch = epoch;
        result.params = params;
        result.alpha = alpha;
        stale = 0;
      } else if (++stale >= config.early_stop_patience) {
        break;
      }
    }
  } catch (const NonFiniteError& err) {
    result.abort_reason = err.what();
    emit(epoch, "abort", std::nan(""), std::nullopt);
    csv.flush();
    save_checkpoint(checkpoint_entries(result.params, result.alpha, meta.algorithm), out_dir / "best.ckpt");
    throw;
  }
  csv.flush();
  save_checkpoint(checkpoint_entries(result.params, result.alpha, meta.algorithm), out_dir / "best.ckpt");
  return result;
}

EvalReport evaluate(const ParamSet& params, const AlphaSet& alpha, const RunConfig& config, std::uint64_t seed,
                    int episodes, bool cross_domain) {
  if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
  const TaskFamily family = config.task_family();
  if (cross_domain && !family.shift) throw ConfigError("cross-domain evaluation requested but cross_domain = false");
  const MlpSpec spec = config.mlp_spec();
  check_layout(params, spec);

  const RngStream base = RngStream(seed).substream("eval").substream(cross_domain ? "cross-domain" : "test");
  std::vector<double> losses, metrics;
  for (int i = 0; i < episodes; ++i) {
    RngStream rng = base.substream("episode-" + std::to_string(i));
    Task task = sample_task(family, config.k_shot, config.n_query, rng, cross_domain);
    EvalResult r = meta_test_adapt(params, alpha, task, config.meta, spec);
    losses.push_back(r.loss);
    if (r.accuracy) metrics.push_back(*r.accuracy);
  }

  auto mean_ci = [](const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    if (xs.size() < 2) return std::pair{mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::pair{mean, 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
  };

  EvalReport report;
  report.episodes = episodes;
  std::tie(report.loss_mean, report.loss_ci95) = mean_ci(losses);
  if (!metrics.empty()) {
    auto [m, ci] = mean_ci(metrics);
    report.metric_mean = m;
    report.metric_ci95 = ci;
  }
  if (episodes == 1) report.status = "warning:degenerate-sample";
  return report;
}

std::string format_report_row(const ReportRow& row) {
  const auto& r = row.report;
  std::string line = row.run_id + ',' + std::to_string(row.seed) + ',' + row.algorithm + ',' + row.noise_mode + ',' +
                     format_real(row.p) + ',' + row.layers + ',' + row.split + ',' + std::to_string(r.episodes) + ',';
  line += (row.best_epoch >= 0 ? std::to_string(row.best_epoch) : std::string()) + ',';
  line += (row.best_val_loss ? format_real(*row.best_val_loss) : std::string()) + ',';
  if (r.episodes > 0) line += format_real(r.loss_mean) + ',' + format_real(r.loss_ci95);
  else line += ',';
  line += ',';
  line += (r.metric_mean ? format_real(*r.metric_mean) : std::string()) + ',';
  line += (r.metric_ci95 ? format_real(*r.metric_ci95) : std::string()) + ',';
  line += sanitize(r.status);
  return line;
}

ReportRow cmd_eval(const fs::path& checkpoint, const RunConfig& config, std::uint64_t seed, int episodes,
                   bool cross_domain, const fs::path& out_dir) {
  config.validate();
  auto [params, alpha] = split_checkpoint(load_checkpoint(checkpoint), config);
  const auto [mode, p] = effective_noise(config.meta);
  ReportRow row;
  row.run_id = config.run_id;
  row.seed = seed;
  row.algorithm = algorithm_name(config.meta.algorithm);
  row.noise_mode = mode;
  row.p = p;
  row.layers = layers_string(config.meta.noise);
  row.split = cross_domain ? "cross-domain" : "meta-test";
  row.report = evaluate(params, alpha, config, seed, episodes, cross_domain);
  fs::create_directories(out_dir);
  write_report(out_dir / "report.csv", {row});
  return row;
}

namespace {

/// Trains one cell and appends its test (and cross-domain) rows.
void run_cell(RunConfig cfg, std::uint64_t seed, const std::string& mode_label, double p, const std::string& layers,
              int episodes, const fs::path& dir, std::vector<ReportRow>& rows) {
  cfg.seed = seed;
  ReportRow base;
  base.run_id = cfg.run_id;
  base.seed = seed;
  base.algorithm = algorithm_name(cfg.meta.algorithm);
  base.noise_mode = mode_label;
  base.p = p;
  base.layers = layers;
  try {
    TrainResult tr = train(cfg, seed, dir);
    base.best_epoch = tr.best_epoch;
    base.best_val_loss = tr.best_val_loss;
    ReportRow test = base;
    test.split = "meta-test";
    test.report = evaluate(tr.params, tr.alpha, cfg, seed, episodes, false);
    rows.push_back(test);
    if (cfg.cross_domain) {
      ReportRow cross = base;
      cross.split = "cross-domain";
      cross.report = evaluate(tr.params, tr.alpha, cfg, seed, episodes, true);
      rows.push_back(cross);
    }
  } catch (const Error& err) {
    ReportRow failed = base;
    failed.split = "meta-test";
    failed.report.status = std::string("failed:") + err.what();
    rows.push_back(failed);
  }
}

}  // namespace

std::vector<ReportRow> cmd_sweep(const RunConfig& config, const SweepOptions& options, const fs::path& out_dir) {
  config.validate();
  if (options.n_seeds < 1) throw ConfigError("sweep: need at least one seed");
  for (double p : options.p_list) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("sweep: p=" + format_real(p) + " is outside [0,1)");
  }
  for (const auto& m : options.modes) {
    if (m != "off" && m != "binary" && m != "gaussian" && m != "activation") {
      throw ConfigError("sweep: unknown mode '" + m + "' (expected off, binary, gaussian or activation)");
    }
  }
  std::vector<ReportRow> rows;
  for (const auto& mode : options.modes) {
    for (double p : options.p_list) {
      for (int s = 0; s < options.n_seeds; ++s) {
        const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(s);
        RunConfig cfg = config;
        cfg.meta.activation_dropout = 0.0;
        if (mode == "off") {
          cfg.meta.noise.mode = NoiseMode::Off;
        } else if (mode == "activation") {
          cfg.meta.noise.mode = NoiseMode::Off;
          cfg.meta.activation_dropout = p;
        } else {
          cfg.meta.noise.mode = parse_noise_mode(mode);
          cfg.meta.noise.p = p;
        }
        cfg.run_id = mode + "-p" + format_real(p) + "-s" + std::to_string(seed);
        run_cell(cfg, seed, mode, p, layers_string(cfg.meta.noise), options.eval_episodes, out_dir / cfg.run_id,
                 rows);
      }
    }
  }
  fs::create_directories(out_dir);
  write_report(out_dir / "report.csv", rows);
  return rows;
}

std::vector<ReportRow> cmd_ablate_layers(const RunConfig& config, const AblationOptions& options,
                                         const fs::path& out_dir) {
  config.validate();
  if (options.n_seeds < 1) throw ConfigError("ablate-layers: need at least one seed");
  const auto labels = layer_labels(config.mlp_spec());
  struct Selector {
    std::string text;
    bool none = false;
    std::set<std::string> layers;
  };
  std::vector<Selector> selectors;
  for (const auto& text : options.selectors) {
    Selector sel{text, text == "none", {}};
    if (!sel.none) {
      sel.layers = parse_layer_selector(text, '+');
      for (const auto& l : sel.layers) {
        if (std::find(labels.begin(), labels.end(), l) == labels.end()) {
          throw ConfigError("ablate-layers: unknown layer label '" + l + "' in selector '" + text + "'");
        }
      }
    }
    selectors.push_back(std::move(sel));
  }

  std::vector<ReportRow> rows;
  for (const auto& sel : selectors) {
    for (int s = 0; s < options.n_seeds; ++s) {
      const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(s);
      RunConfig cfg = config;
      if (sel.none) cfg.meta.noise.mode = NoiseMode::Off;
      cfg.meta.noise.layers = sel.layers;
      cfg.run_id = "layers-" + sel.text + "-s" + std::to_string(seed);
      const auto [cell_mode, cell_p] = effective_noise(cfg.meta);
      run_cell(cfg, seed, cell_mode, cell_p, sel.text, options.eval_episodes, out_dir / cfg.run_id, rows);
    }
  }
  fs::create_directories(out_dir);
  write_report(out_dir / "report.csv", rows);
  return rows;
}

}  // namespace mgrad::harness
