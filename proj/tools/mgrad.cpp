// Command-line driver: train, eval, sweep, ablate-layers.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mgrad/harness/config.hpp"
#include "mgrad/harness/runs.hpp"

namespace {

using namespace mgrad;
using namespace mgrad::harness;

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_p_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_csv(text)) {
    std::size_t used = 0;
    double v = std::stod(item, &used);
    if (used != item.size()) throw ConfigError("--p-list: cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--p-list is empty");
  return out;
}

void print_rows(const std::vector<ReportRow>& rows) {
  std::cout << kReportHeader << '\n';
  for (const auto& r : rows) std::cout << format_report_row(r) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-based meta-learning with inner-loop gradient dropout"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;

  auto* train_cmd = app.add_subcommand("train", "meta-train one model; writes metrics.csv and best.ckpt");
  train_cmd->add_option("--config", config_path, "config file")->required();
  train_cmd->add_option("--seed", seed, "run seed")->required();
  train_cmd->add_option("--out", out_dir, "output directory")->required();

  std::string checkpoint;
  int episodes = 100;
  bool cross_domain = false;
  auto* eval_cmd = app.add_subcommand("eval", "meta-test a checkpoint; writes report.csv");
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--config", config_path, "config file")->required();
  eval_cmd->add_option("--seed", seed, "evaluation seed")->required();
  eval_cmd->add_option("--episodes", episodes, "test episodes")->required();
  eval_cmd->add_flag("--cross-domain", cross_domain, "evaluate on the shifted task domain");
  eval_cmd->add_option("--out", out_dir, "report directory (default: checkpoint's directory)");

  std::string p_list, modes;
  int n_seeds = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "train/evaluate every (mode, p, seed) cell");
  sweep_cmd->add_option("--config", config_path, "config file")->required();
  sweep_cmd->add_option("--p-list", p_list, "comma-separated noise rates")->required();
  sweep_cmd->add_option("--modes", modes, "comma-separated modes: off,binary,gaussian,activation")->required();
  sweep_cmd->add_option("--seeds", n_seeds, "seeds per cell, counted up from the config seed")->required();
  sweep_cmd->add_option("--out", out_dir, "output directory")->required();
  sweep_cmd->add_option("--episodes", episodes, "test episodes per cell");

  std::string selectors;
  auto* ablate_cmd = app.add_subcommand("ablate-layers", "train/evaluate one run per DropGrad layer selector");
  ablate_cmd->add_option("--config", config_path, "config file")->required();
  ablate_cmd->add_option("--selectors", selectors, "comma-separated selectors: all, none, or labels joined by '+'")
      ->required();
  ablate_cmd->add_option("--out", out_dir, "output directory")->required();
  ablate_cmd->add_option("--seeds", n_seeds, "seeds per selector");
  ablate_cmd->add_option("--episodes", episodes, "test episodes per run");

  auto* keys_cmd = app.add_subcommand("config-keys", "list configuration keys and defaults");

  CLI11_PARSE(app, argc, argv);

  try {
    if (keys_cmd->parsed()) {
      for (const auto& k : config_keys()) std::cout << k.name << " = " << k.default_value << "  # " << k.description << '\n';
      return 0;
    }
    RunConfig config = load_config(config_path);
    if (train_cmd->parsed()) {
      try {
        TrainResult r = train(config, seed, out_dir);
        std::cout << "best_epoch=" << r.best_epoch << " best_val_loss=" << format_real(r.best_val_loss)
                  << " epochs_run=" << r.epochs_run << '\n';
      } catch (const NonFiniteError& err) {
        std::cerr << "training aborted: " << err.what() << '\n';
        return 2;
      }
    } else if (eval_cmd->parsed()) {
      if (out_dir.empty()) out_dir = std::filesystem::path(checkpoint).parent_path().string();
      if (out_dir.empty()) out_dir = ".";
      ReportRow row = cmd_eval(checkpoint, config, seed, episodes, cross_domain, out_dir);
      print_rows({row});
    } else if (sweep_cmd->parsed()) {
      SweepOptions opts{parse_p_list(p_list), split_csv(modes), n_seeds, episodes};
      print_rows(cmd_sweep(config, opts, out_dir));
    } else if (ablate_cmd->parsed()) {
      AblationOptions opts{split_csv(selectors), n_seeds, episodes};
      print_rows(cmd_ablate_layers(config, opts, out_dir));
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
