#pragma once

// Data-parallel inner loops of the transform pipeline.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, a vectorized variant (AVX2+FMA on x86-64, NEON on AArch64).
// The active table is picked once at runtime from the CPU features; the
// environment variable TFPHASE_SIMD=scalar|avx2|neon overrides the choice.
// Vectorized and scalar results agree to rounding (FMA contraction and
// summation order differ), which the equivalence tests pin down.

#include <cstddef>
#include <cstdint>
#include <string>

#include "tfphase/common.hpp"

namespace tfphase::simd {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  Isa isa = Isa::scalar;

  // out[i] = in[i] * w[i] * scale
  void (*scale_by_real)(const cplx* in, const double* w, double scale, cplx* out,
                        std::size_t n) = nullptr;

  // out[k] = sum_i z[i] * w[k][i] for k < count. One pass over z serves
  // several real weight sequences (window variants).
  void (*weighted_sums)(const cplx* z, const double* const* w, std::size_t count, std::size_t n,
                        cplx* out) = nullptr;

  // out[i] = Im(aux[i] * conj(v[i])) / |v[i]|^2 where |v[i]|^2 >= min_abs2;
  // NaN and valid[i] = 0 elsewhere.
  void (*phase_ratio)(const cplx* v, const cplx* aux, double min_abs2, double* out,
                      std::uint8_t* valid, std::size_t n) = nullptr;

  // out[i] = |in[i]|^2
  void (*abs2)(const cplx* in, double* out, std::size_t n) = nullptr;

  // out[i] = a[i] * b[i]
  void (*multiply)(const cplx* a, const cplx* b, cplx* out, std::size_t n) = nullptr;
};

bool isa_available(Isa isa);
const KernelTable& kernels_for(Isa isa);  // throws if the ISA is unavailable
const KernelTable& kernels();             // active table
Isa active_isa();
void set_active_isa(Isa isa);

std::string to_string(Isa isa);
Isa parse_isa(const std::string& name);

namespace detail {
const KernelTable& scalar_table();
#if defined(TFPHASE_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(TFPHASE_HAVE_NEON)
const KernelTable& neon_table();
#endif
}  // namespace detail

}  // namespace tfphase::simd
