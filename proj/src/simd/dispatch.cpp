#include <atomic>
#include <cstdlib>

#include "tfphase/error.hpp"
#include "tfphase/simd/kernels.hpp"

namespace tfphase::simd {

namespace {

bool cpu_has_avx2() {
#if defined(TFPHASE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa best_available() {
  if (isa_available(Isa::avx2)) return Isa::avx2;
  if (isa_available(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

Isa initial_isa() {
  if (const char* env = std::getenv("TFPHASE_SIMD"); env != nullptr && *env != '\0') {
    const Isa requested = parse_isa(env);
    if (isa_available(requested)) return requested;
  }
  return best_available();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&kernels_for(initial_isa())};
  return slot;
}

}  // namespace

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2: {
      static const bool has = cpu_has_avx2();
      return has;
    }
    case Isa::neon:
#if defined(TFPHASE_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& kernels_for(Isa isa) {
  if (!isa_available(isa)) {
    throw UnsupportedOperation("SIMD variant " + to_string(isa) + " is not available on this CPU");
  }
  switch (isa) {
#if defined(TFPHASE_HAVE_AVX2)
    case Isa::avx2: return detail::avx2_table();
#endif
#if defined(TFPHASE_HAVE_NEON)
    case Isa::neon: return detail::neon_table();
#endif
    default: return detail::scalar_table();
  }
}

const KernelTable& kernels() { return *active_slot().load(std::memory_order_acquire); }

Isa active_isa() { return kernels().isa; }

void set_active_isa(Isa isa) {
  active_slot().store(&kernels_for(isa), std::memory_order_release);
}

std::string to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

Isa parse_isa(const std::string& name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  if (name == "neon") return Isa::neon;
  throw InvalidArgument("unknown SIMD variant '" + name + "'");
}

}  // namespace tfphase::simd
