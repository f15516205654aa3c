#include "mgrad/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace mgrad::harness {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, v, "a real number");
  return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true/false");
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

struct KeySpec {
  ConfigKey doc;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      {{"algorithm", "maml2", "maml2 | maml1 | metasgd"},
       [](RunConfig& c, const std::string&, const std::string& v) { c.meta.algorithm = parse_algorithm(v); }},
      {{"alpha0", "0.01", "inner learning rate (MetaSGD: initial per-element rate)"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.meta.alpha0 = to_double(k, v); }},
      {{"eta", "0.001", "outer learning rate"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.meta.eta = to_double(k, v); }},
      {{"n_inner", "5", "inner-loop gradient steps"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.meta.n_inner = to_int<int>(k, v); }},
      {{"meta_batch", "4", "tasks per outer update"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.meta.meta_batch = to_int<int>(k, v); }},
      {{"outer_optimizer", "adam", "sgd | adam"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "sgd") c.meta.optimizer = OptimizerKind::Sgd;
         else if (v == "adam") c.meta.optimizer = OptimizerKind::Adam;
         else bad_value(k, v, "sgd or adam");
       }},
      {{"adam_beta1", "0.9", "Adam first-moment decay"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.meta.adam.beta1 = to_double(k, v); }},
      {{"adam_beta2", "0.999", "Adam second-moment decay"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.meta.adam.beta2 = to_double(k, v); }},
      {{"adam_eps", "1e-8", "Adam denominator offset"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.meta.adam.eps = to_double(k, v); }},
      {{"noise_mode", "gaussian", "inner-gradient noise: off | binary | gaussian"},
       [](RunConfig& c, const std::string&, const std::string& v) { c.meta.noise.mode = parse_noise_mode(v); }},
      {{"noise_p", "0.1", "noise rate p in [0,1)"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.meta.noise.p = to_double(k, v); }},
      {{"noise_layers", "all", "layers receiving noise: all, or comma-separated labels (L0,L1,...,OUT)"},
       [](RunConfig& c, const std::string&, const std::string& v) { c.meta.noise.layers = parse_layer_selector(v, ','); }},
      {{"noise_resample_per_step", "true", "fresh noise at every inner step (false: one mask per adaptation)"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.meta.noise.resample_per_step = to_bool(k, v); }},
      {{"activation_dropout", "0", "inverted-dropout rate on hidden activations (baseline); 0 disables"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.meta.activation_dropout = to_double(k, v); }},
      {{"freeze_alpha", "false", "MetaSGD: keep learning rates at alpha0"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.meta.freeze_alpha = to_bool(k, v); }},
      {{"epochs", "400", "training epochs (0 evaluates the initialization only)"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.epochs = to_int<int>(k, v); }},
      {{"episodes_per_epoch", "10", "outer updates per epoch"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.episodes_per_epoch = to_int<int>(k, v); }},
      {{"early_stop_patience", "50", "epochs without validation improvement before stopping"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.early_stop_patience = to_int<int>(k, v); }},
      {{"family", "sinusoid", "task family: sinusoid | clusters"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "sinusoid") c.family.kind = FamilyKind::Sinusoid;
         else if (v == "clusters") c.family.kind = FamilyKind::Clusters;
         else bad_value(k, v, "sinusoid or clusters");
       }},
      {{"k_shot", "5", "support points per task (per class for clusters)"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.k_shot = to_int<Index>(k, v); }},
      {{"n_query", "10", "query points per task (per class for clusters)"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.n_query = to_int<Index>(k, v); }},
      {{"n_pool", "64", "size of the finite meta-training task pool; 0 draws fresh tasks"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.n_pool = to_int<std::size_t>(k, v); }},
      {{"n_val_tasks", "32", "frozen meta-validation tasks"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.n_val_tasks = to_int<int>(k, v); }},
      {{"hidden", "40,40", "hidden layer widths, comma-separated"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.hidden.clear();
         if (v == "none") return;
         for (const auto& item : split(v, ',')) c.hidden.push_back(to_int<Index>(k, item));
       }},
      {{"activation", "tanh", "hidden activation: tanh | relu"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "tanh") c.activation = Activation::Tanh;
         else if (v == "relu") c.activation = Activation::Relu;
         else bad_value(k, v, "tanh or relu");
       }},
      {{"amp_min", "0.1", "sinusoid amplitude lower bound"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.family.sinusoid.amplitude.lo = to_double(k, v); }},
      {{"amp_max", "5.0", "sinusoid amplitude upper bound"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.family.sinusoid.amplitude.hi = to_double(k, v); }},
      {{"phase_min", "0", "sinusoid phase lower bound"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.family.sinusoid.phase.lo = to_double(k, v); }},
      {{"phase_max", "3.14159265358979", "sinusoid phase upper bound"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.family.sinusoid.phase.hi = to_double(k, v); }},
      {{"input_min", "-5", "sinusoid input lower bound"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.family.sinusoid.input.lo = to_double(k, v); }},
      {{"input_max", "5", "sinusoid input upper bound"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.family.sinusoid.input.hi = to_double(k, v); }},
      {{"n_way", "5", "clusters per classification task"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.family.clusters.n_way = to_int<Index>(k, v); }},
      {{"d_in", "16", "cluster input dimension"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.family.clusters.d_in = to_int<Index>(k, v); }},
      {{"mean_min", "-2", "cluster mean region lower bound (per coordinate)"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.family.clusters.mean_region.lo = to_double(k, v); }},
      {{"mean_max", "2", "cluster mean region upper bound (per coordinate)"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.family.clusters.mean_region.hi = to_double(k, v); }},
      {{"cluster_std", "1.0", "isotropic cluster standard deviation"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.family.clusters.cluster_std = to_double(k, v); }},
      {{"cross_domain", "true", "configure a shifted domain for eval --cross-domain"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.cross_domain = to_bool(k, v); }},
      {{"shift_min", "auto", "shifted range lower bound (sinusoid: 5, clusters: 3)"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "auto") c.shift_min.reset();
         else c.shift_min = to_double(k, v);
       }},
      {{"shift_max", "auto", "shifted range upper bound (sinusoid: 10, clusters: 7)"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "auto") c.shift_max.reset();
         else c.shift_max = to_double(k, v);
       }},
      {{"seed", "0", "base seed"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_int<std::uint64_t>(k, v); }},
      {{"out_dir", "out", "output directory"},
       [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
      {{"run_id", "run", "identifier written to every metrics row"},
       [](RunConfig& c, const std::string&, const std::string& v) { c.run_id = v; }},
  };
  return table;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& k : key_table()) out.push_back(k.doc);
    return out;
  }();
  return keys;
}

std::set<std::string> parse_layer_selector(const std::string& text, char sep) {
  std::set<std::string> out;
  if (text == "all") return out;
  for (const auto& item : split(text, sep)) {
    if (item.empty()) throw ConfigError("layer selector '" + text + "' has an empty label");
    out.insert(item);
  }
  return out;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& k : key_table()) {
    if (k.doc.name == key) {
      k.set(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

MlpSpec RunConfig::mlp_spec() const {
  MlpSpec spec;
  spec.layer_dims.push_back(family.input_dim());
  spec.layer_dims.insert(spec.layer_dims.end(), hidden.begin(), hidden.end());
  spec.layer_dims.push_back(family.output_dim());
  spec.activation = activation;
  spec.head = family.kind == FamilyKind::Sinusoid ? Head::Regression : Head::Classification;
  return spec;
}

TaskFamily RunConfig::task_family() const {
  TaskFamily f = family;
  f.shift.reset();
  if (cross_domain) {
    const bool sin = f.kind == FamilyKind::Sinusoid;
    f.shift = Interval{shift_min.value_or(sin ? 5.0 : 3.0), shift_max.value_or(sin ? 10.0 : 7.0)};
  }
  return f;
}

void RunConfig::validate() const {
  meta.validate();
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (episodes_per_epoch < 1) throw ConfigError("episodes_per_epoch must be at least 1");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be at least 1");
  if (k_shot < 1 || n_query < 1) throw ConfigError("k_shot and n_query must be at least 1");
  if (n_val_tasks < 1) throw ConfigError("n_val_tasks must be at least 1");
  task_family().validate();
  const MlpSpec spec = mlp_spec();
  spec.validate();
  const auto labels = layer_labels(spec);
  for (const auto& l : meta.noise.layers) {
    if (std::find(labels.begin(), labels.end(), l) == labels.end()) {
      throw ConfigError("noise_layers: unknown layer label '" + l + "'");
    }
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& err) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace mgrad::harness
