#include <limits>

#include "tfphase/simd/kernels.hpp"

namespace tfphase::simd {

namespace {

void scale_by_real(const cplx* in, const double* w, double scale, cplx* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = w[i] * scale;
    out[i] = {in[i].real() * s, in[i].imag() * s};
  }
}

void weighted_sums(const cplx* z, const double* const* w, std::size_t count, std::size_t n,
                   cplx* out) {
  for (std::size_t k = 0; k < count; ++k) {
    double re = 0.0;
    double im = 0.0;
    const double* wk = w[k];
    for (std::size_t i = 0; i < n; ++i) {
      re += z[i].real() * wk[i];
      im += z[i].imag() * wk[i];
    }
    out[k] = {re, im};
  }
}

void phase_ratio(const cplx* v, const cplx* aux, double min_abs2, double* out,
                 std::uint8_t* valid, std::size_t n) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < n; ++i) {
    const double vr = v[i].real();
    const double vi = v[i].imag();
    const double den = vr * vr + vi * vi;
    if (den >= min_abs2 && den > 0.0) {
      out[i] = (aux[i].imag() * vr - aux[i].real() * vi) / den;
      valid[i] = 1;
    } else {
      out[i] = nan;
      valid[i] = 0;
    }
  }
}

void abs2(const cplx* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = in[i].real() * in[i].real() + in[i].imag() * in[i].imag();
  }
}

void multiply(const cplx* a, const cplx* b, cplx* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double ar = a[i].real();
    const double ai = a[i].imag();
    const double br = b[i].real();
    const double bi = b[i].imag();
    out[i] = {ar * br - ai * bi, ar * bi + ai * br};
  }
}

}  // namespace

namespace detail {

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::scalar, scale_by_real, weighted_sums, phase_ratio, abs2,
                                 multiply};
  return table;
}

}  // namespace detail

}  // namespace tfphase::simd
