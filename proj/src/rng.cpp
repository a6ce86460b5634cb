#include "hydg/rng.hpp"

#include <cmath>

#include "hydg/error.hpp"

namespace hydg {

std::uint64_t Rng::mix(std::uint64_t x) {
  // splitmix64 finaliser
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::substream(std::string_view name) const {
  // FNV-1a over the name, folded into the parent seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return Rng(mix(seed_ ^ mix(h)));
}

Rng Rng::substream(std::uint64_t index) const { return Rng(mix(seed_ + mix(index + 1))); }

double Rng::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double Rng::normal(double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(engine_);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw ContractError("Rng::index: empty range");
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

DenseMatrix Rng::uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi) {
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = uniform(lo, hi);
  return m;
}

DenseMatrix Rng::normal_matrix(std::size_t rows, std::size_t cols, double stddev) {
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = normal(0.0, stddev);
  return m;
}

DenseMatrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return rng.uniform_matrix(fan_in, fan_out, -limit, limit);
}

}  // namespace hydg
