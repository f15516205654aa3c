#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace mgrad {

/// Named, splittable pseudo-random stream.
///
/// A stream is identified by (root seed, path). `substream(name)` derives a
/// child from the identity alone, never from the parent's consumption state,
/// so drawing from one stream cannot perturb any other. Paths are fed
/// verbatim into the seed sequence; distinct paths give distinct seeds.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::string path = "");

  RngStream substream(std::string_view name) const;

  std::uint64_t seed() const { return seed_; }
  const std::string& path() const { return path_; }

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::string path_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace mgrad
