// NEON variants for AArch64 (Advanced SIMD is mandatory there, so no runtime
// check is needed). One float64x2_t holds one complex value.

#include <arm_neon.h>

#include <limits>

#include "tfphase/simd/kernels.hpp"

namespace tfphase::simd {

namespace {

inline const double* as_doubles(const cplx* p) { return reinterpret_cast<const double*>(p); }
inline double* as_doubles(cplx* p) { return reinterpret_cast<double*>(p); }

void scale_by_real(const cplx* in, const double* w, double scale, cplx* out, std::size_t n) {
  const double* src = as_doubles(in);
  double* dst = as_doubles(out);
  for (std::size_t i = 0; i < n; ++i) {
    vst1q_f64(dst + 2 * i, vmulq_n_f64(vld1q_f64(src + 2 * i), w[i] * scale));
  }
}

void weighted_sums(const cplx* z, const double* const* w, std::size_t count, std::size_t n,
                   cplx* out) {
  const double* src = as_doubles(z);
  for (std::size_t k = 0; k < count; ++k) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    const double* wk = w[k];
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
      acc0 = vfmaq_n_f64(acc0, vld1q_f64(src + 2 * i), wk[i]);
      acc1 = vfmaq_n_f64(acc1, vld1q_f64(src + 2 * i + 2), wk[i + 1]);
    }
    if (i < n) acc0 = vfmaq_n_f64(acc0, vld1q_f64(src + 2 * i), wk[i]);
    const float64x2_t acc = vaddq_f64(acc0, acc1);
    out[k] = {vgetq_lane_f64(acc, 0), vgetq_lane_f64(acc, 1)};
  }
}

void phase_ratio(const cplx* v, const cplx* aux, double min_abs2, double* out,
                 std::uint8_t* valid, std::size_t n) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  const double* vp = as_doubles(v);
  const double* ap = as_doubles(aux);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    // Deinterleave two complex values into (re, re) and (im, im).
    const float64x2x2_t vv = vld2q_f64(vp + 2 * i);
    const float64x2x2_t aa = vld2q_f64(ap + 2 * i);
    const float64x2_t den = vfmaq_f64(vmulq_f64(vv.val[0], vv.val[0]), vv.val[1], vv.val[1]);
    const float64x2_t num = vfmsq_f64(vmulq_f64(aa.val[1], vv.val[0]), aa.val[0], vv.val[1]);
    const float64x2_t q = vdivq_f64(num, den);
    for (int lane = 0; lane < 2; ++lane) {
      const double d = lane == 0 ? vgetq_lane_f64(den, 0) : vgetq_lane_f64(den, 1);
      const double r = lane == 0 ? vgetq_lane_f64(q, 0) : vgetq_lane_f64(q, 1);
      const bool ok = d >= min_abs2 && d > 0.0;
      out[i + lane] = ok ? r : nan;
      valid[i + lane] = ok ? 1 : 0;
    }
  }
  for (; i < n; ++i) {
    const double vr = v[i].real();
    const double vi = v[i].imag();
    const double den = vr * vr + vi * vi;
    const bool ok = den >= min_abs2 && den > 0.0;
    out[i] = ok ? (aux[i].imag() * vr - aux[i].real() * vi) / den : nan;
    valid[i] = ok ? 1 : 0;
  }
}

void abs2(const cplx* in, double* out, std::size_t n) {
  const double* src = as_doubles(in);
  for (std::size_t i = 0; i < n; ++i) {
    const float64x2_t a = vld1q_f64(src + 2 * i);
    out[i] = vaddvq_f64(vmulq_f64(a, a));
  }
}

void multiply(const cplx* a, const cplx* b, cplx* out, std::size_t n) {
  const double* ap = as_doubles(a);
  const double* bp = as_doubles(b);
  double* dst = as_doubles(out);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2x2_t av = vld2q_f64(ap + 2 * i);
    const float64x2x2_t bv = vld2q_f64(bp + 2 * i);
    float64x2x2_t r;
    r.val[0] = vfmsq_f64(vmulq_f64(av.val[0], bv.val[0]), av.val[1], bv.val[1]);
    r.val[1] = vfmaq_f64(vmulq_f64(av.val[0], bv.val[1]), av.val[1], bv.val[0]);
    vst2q_f64(dst + 2 * i, r);
  }
  for (; i < n; ++i) {
    const double ar = a[i].real();
    const double ai = a[i].imag();
    const double br = b[i].real();
    const double bi = b[i].imag();
    out[i] = {ar * br - ai * bi, ar * bi + ai * br};
  }
}

}  // namespace

namespace detail {

const KernelTable& neon_table() {
  static const KernelTable table{Isa::neon, scale_by_real, weighted_sums, phase_ratio, abs2,
                                 multiply};
  return table;
}

}  // namespace detail

}  // namespace tfphase::simd
