#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mgrad/params.hpp"
#include "mgrad/rng.hpp"

namespace mgrad {

enum class NoiseMode { Off, Binary, Gaussian };

const char* noise_mode_name(NoiseMode mode);
NoiseMode parse_noise_mode(const std::string& text);

/// Gradient-noise settings for the inner loop.
///
/// Binary noise is Bernoulli(1-p)/(1-p); Gaussian noise is N(1, p/(1-p)).
/// Both have mean 1 and variance p/(1-p). An empty `layers` set selects
/// every layer.
struct NoiseConfig {
  NoiseMode mode = NoiseMode::Off;
  double p = 0.0;
  std::set<std::string> layers;
  bool resample_per_step = true;

  void validate() const;
  bool active() const { return mode != NoiseMode::Off; }
  bool selects(const std::string& layer) const { return layers.empty() || layers.count(layer) > 0; }
  double variance() const { return p / (1.0 - p); }
};

/// Elementwise i.i.d. noise of the given shape.
Tensor sample_noise(const NoiseConfig& config, const Shape& shape, RngStream& rng);

/// One noise tensor per parameter, or nullopt where the parameter's layer
/// is not selected. Draws happen in ParamSet order, selected entries only.
/// Mode off returns all-nullopt without touching `rng`.
std::vector<std::optional<Tensor>> sample_masks(const ParamSet& params, const NoiseConfig& config, RngStream& rng);

/// g' = g ⊙ n on selected layers; unselected entries are copied unchanged.
GradMap apply_dropgrad(const GradMap& grads, const ParamSet& params, const NoiseConfig& config, RngStream& rng);

struct NoiseMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Monte Carlo estimate of E[n] and Var[n] (unbiased sample variance).
NoiseMoments noise_moments(const NoiseConfig& config, std::size_t n_samples, RngStream& rng);

}  // namespace mgrad
