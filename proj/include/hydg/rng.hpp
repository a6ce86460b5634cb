#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "hydg/matrix.hpp"

namespace hydg {

// Seeded pseudo-random stream. Substreams are derived from the seed and a
// name, so a consumer gets the same draws no matter what other components
// pulled from the parent first.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Rng substream(std::string_view name) const;
  Rng substream(std::uint64_t index) const;

  double uniform(double lo = 0.0, double hi = 1.0);
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p);
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  std::uint64_t next() { return engine_(); }

  DenseMatrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi);
  DenseMatrix normal_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0);

 private:
  static std::uint64_t mix(std::uint64_t x);

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// Glorot/Xavier uniform initialisation for a fan_in x fan_out weight.
DenseMatrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace hydg
