#include <atomic>
#include <cstdlib>
#include <string>

#include "hydg/error.hpp"
#include "hydg/kernels.hpp"

namespace hydg::kernels {
namespace {

const KernelTable& initial_table() {
  if (const char* env = std::getenv("HYDG_SIMD"); env != nullptr && *env != '\0') {
    const Isa requested = parse_isa(env);
    if (supported(requested)) return table_for(requested);
  }
  return table_for(best_supported());
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{&initial_table()};
  return current;
}

}  // namespace

bool supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
#if defined(__aarch64__) || defined(__ARM_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa best_supported() {
  if (supported(Isa::avx2)) return Isa::avx2;
  if (supported(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

const KernelTable& table_for(Isa isa) {
  if (!supported(isa)) {
    throw ParameterError("SIMD variant '" + std::string(name(isa)) + "' not supported on this CPU");
  }
  switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::avx2:
      return avx2_table();
#endif
#if defined(__aarch64__) || defined(__ARM_NEON)
    case Isa::neon:
      return neon_table();
#endif
    default:
      return scalar_table();
  }
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void select(Isa isa) { slot().store(&table_for(isa), std::memory_order_release); }

std::string_view name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

Isa parse_isa(std::string_view text) {
  if (text == "scalar") return Isa::scalar;
  if (text == "avx2") return Isa::avx2;
  if (text == "neon") return Isa::neon;
  throw ParameterError("unknown SIMD variant '" + std::string(text) + "'");
}

}  // namespace hydg::kernels
