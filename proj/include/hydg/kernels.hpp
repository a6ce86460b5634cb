#pragma once

// Inner-loop arithmetic kernels with a scalar reference implementation and
// SIMD variants picked at runtime.
//
// Selection order: HYDG_SIMD environment variable ("scalar", "avx2", "neon")
// if set and supported, otherwise the widest ISA the CPU reports. Every
// variant computes the same quantity; only summation order (and FMA
// contraction) differs, so results agree to within a few ulps.

#include <cstddef>
#include <span>
#include <string_view>

namespace hydg::kernels {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  double (*squared_l2)(const double* x, const double* y, std::size_t n);
  double (*max_abs_diff)(const double* x, const double* y, std::size_t n);
};

const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif
#if defined(__aarch64__) || defined(__ARM_NEON)
const KernelTable& neon_table();
#endif

bool supported(Isa isa);
Isa best_supported();
const KernelTable& table_for(Isa isa);  // throws ParameterError if unsupported

const KernelTable& active();
void select(Isa isa);

std::string_view name(Isa isa);
Isa parse_isa(std::string_view text);

inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}

inline double squared_l2(std::span<const double> x, std::span<const double> y) {
  return active().squared_l2(x.data(), y.data(), x.size());
}

inline double max_abs_diff(std::span<const double> x, std::span<const double> y) {
  return active().max_abs_diff(x.data(), y.data(), x.size());
}

// RAII override of the active kernel table, for tests.
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa) : previous_(active().isa) { select(isa); }
  ~ScopedIsa() { select(previous_); }
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa previous_;
};

}  // namespace hydg::kernels
