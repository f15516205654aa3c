#include "mgrad/dropgrad.hpp"

#include <cmath>

namespace mgrad {

const char* noise_mode_name(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::Off: return "off";
    case NoiseMode::Binary: return "binary";
    case NoiseMode::Gaussian: return "gaussian";
  }
  return "off";
}

NoiseMode parse_noise_mode(const std::string& text) {
  if (text == "off") return NoiseMode::Off;
  if (text == "binary") return NoiseMode::Binary;
  if (text == "gaussian") return NoiseMode::Gaussian;
  throw ConfigError("unknown noise mode '" + text + "' (expected off, binary or gaussian)");
}

void NoiseConfig::validate() const {
  if (mode == NoiseMode::Off) return;
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("noise rate p=" + std::to_string(p) + " is outside [0,1)");
}

namespace {

double draw(const NoiseConfig& config, double stddev, RngStream& rng) {
  if (config.mode == NoiseMode::Binary) return rng.uniform() < config.p ? 0.0 : 1.0 / (1.0 - config.p);
  return 1.0 + stddev * rng.normal();
}

}  // namespace

Tensor sample_noise(const NoiseConfig& config, const Shape& shape, RngStream& rng) {
  if (config.mode == NoiseMode::Off) throw ConfigError("sample_noise: noise mode is off");
  config.validate();
  const double stddev = std::sqrt(config.variance());
  Tensor out(shape);
  for (Index k = 0; k < out.size(); ++k) out[k] = draw(config, stddev, rng);
  return out;
}

std::vector<std::optional<Tensor>> sample_masks(const ParamSet& params, const NoiseConfig& config, RngStream& rng) {
  std::vector<std::optional<Tensor>> masks(params.size());
  if (!config.active()) return masks;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (config.selects(params[i].layer)) masks[i] = sample_noise(config, params.value(i).shape(), rng);
  }
  return masks;
}

GradMap apply_dropgrad(const GradMap& grads, const ParamSet& params, const NoiseConfig& config, RngStream& rng) {
  check_congruent(grads, params);
  config.validate();
  GradMap out;
  out.names = grads.names;
  out.values = grads.values;
  if (!config.active()) return out;
  auto masks = sample_masks(params, config, rng);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i]) out.values[i].values() *= masks[i]->values();
  }
  return out;
}

NoiseMoments noise_moments(const NoiseConfig& config, std::size_t n_samples, RngStream& rng) {
  if (n_samples == 0) throw Error("noise_moments: need at least one sample");
  Tensor draws = sample_noise(config, Shape{static_cast<Index>(n_samples)}, rng);
  NoiseMoments m;
  m.mean = draws.values().mean();
  if (n_samples > 1) {
    m.variance = (draws.values() - m.mean).square().sum() / static_cast<double>(n_samples - 1);
  }
  return m;
}

}  // namespace mgrad
