#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mgrad/metalearn.hpp"
#include "mgrad/model.hpp"
#include "mgrad/tasks.hpp"

namespace mgrad::harness {

/// Everything one training/evaluation run needs. Read from a flat
/// `key = value` file; see `config_keys()` for the key set and defaults.
struct RunConfig {
  RunConfig() {
    meta.noise.mode = NoiseMode::Gaussian;
    meta.noise.p = 0.1;
  }

  MetaConfig meta;
  int epochs = 400;
  int episodes_per_epoch = 10;
  int early_stop_patience = 50;

  /// Base ranges; the shifted domain is resolved by task_family().
  TaskFamily family;
  bool cross_domain = true;
  std::optional<double> shift_min;
  std::optional<double> shift_max;
  Index k_shot = 5;
  Index n_query = 10;
  /// 0 samples fresh task parameters every episode instead of a pool.
  std::size_t n_pool = 64;
  int n_val_tasks = 32;

  std::vector<Index> hidden{40, 40};
  Activation activation = Activation::Tanh;

  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string run_id = "run";

  MlpSpec mlp_spec() const;
  /// `family` with the shifted domain filled in: amplitudes [5, 10] for
  /// sinusoids and mean region [3, 7] for clusters unless overridden.
  TaskFamily task_family() const;
  /// Cross-field checks, including layer labels in the noise selector.
  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string description;
};

const std::vector<ConfigKey>& config_keys();

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Applies one `key = value` assignment. Throws ConfigError on unknown keys
/// or unparsable values.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

/// Parses "all" (every layer), or labels separated by `sep`.
std::set<std::string> parse_layer_selector(const std::string& text, char sep);

}  // namespace mgrad::harness
