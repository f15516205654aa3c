#include "mgrad/rng.hpp"

#include <vector>

namespace mgrad {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, const std::string& path) {
  std::vector<std::uint32_t> words;
  words.reserve(path.size() + 3);
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  // Length prefix keeps "ab"+"c" and "a"+"bc" style paths apart.
  words.push_back(static_cast<std::uint32_t>(path.size()));
  for (unsigned char c : path) words.push_back(c);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string path)
    : seed_(seed), path_(std::move(path)), engine_(make_engine(seed_, path_)) {}

RngStream RngStream::substream(std::string_view name) const {
  std::string child = path_;
  if (!child.empty()) child += '/';
  child += name;
  return RngStream(seed_, std::move(child));
}

double RngStream::uniform() { return unit_(engine_); }

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }

double RngStream::normal() { return normal_(engine_); }

std::uint64_t RngStream::below(std::uint64_t n) {
  std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
  return dist(engine_);
}

}  // namespace mgrad
