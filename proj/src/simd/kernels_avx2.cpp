// AVX2 + FMA variants. This translation unit is built with -mavx2 -mfma and
// only entered after a runtime CPU check.

#include <immintrin.h>

#include <limits>

#include "tfphase/simd/kernels.hpp"

namespace tfphase::simd {

namespace {

// (w0, w0, w1, w1) from two consecutive weights.
inline __m256d load_pair_broadcast(const double* w) {
  const __m128d w2 = _mm_loadu_pd(w);
  return _mm256_permute4x64_pd(_mm256_castpd128_pd256(w2), 0x50);
}

inline const double* as_doubles(const cplx* p) { return reinterpret_cast<const double*>(p); }
inline double* as_doubles(cplx* p) { return reinterpret_cast<double*>(p); }

void scale_by_real(const cplx* in, const double* w, double scale, cplx* out, std::size_t n) {
  const __m256d s = _mm256_set1_pd(scale);
  const double* src = as_doubles(in);
  double* dst = as_doubles(out);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d ww = _mm256_mul_pd(load_pair_broadcast(w + i), s);
    _mm256_storeu_pd(dst + 2 * i, _mm256_mul_pd(_mm256_loadu_pd(src + 2 * i), ww));
  }
  for (; i < n; ++i) {
    const double f = w[i] * scale;
    out[i] = {in[i].real() * f, in[i].imag() * f};
  }
}

void weighted_sums(const cplx* z, const double* const* w, std::size_t count, std::size_t n,
                   cplx* out) {
  const double* src = as_doubles(z);
  std::size_t k = 0;
  // Four weight sequences per sweep keeps the accumulators in registers.
  for (; k < count; k += 4) {
    const std::size_t m = count - k < 4 ? count - k : 4;
    __m256d acc[4] = {_mm256_setzero_pd(), _mm256_setzero_pd(), _mm256_setzero_pd(),
                      _mm256_setzero_pd()};
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
      const __m256d zz = _mm256_loadu_pd(src + 2 * i);
      for (std::size_t j = 0; j < m; ++j) {
        acc[j] = _mm256_fmadd_pd(zz, load_pair_broadcast(w[k + j] + i), acc[j]);
      }
    }
    for (std::size_t j = 0; j < m; ++j) {
      alignas(32) double lanes[4];
      _mm256_store_pd(lanes, acc[j]);
      double re = lanes[0] + lanes[2];
      double im = lanes[1] + lanes[3];
      for (std::size_t t = i; t < n; ++t) {
        re += z[t].real() * w[k + j][t];
        im += z[t].imag() * w[k + j][t];
      }
      out[k + j] = {re, im};
    }
  }
}

void phase_ratio(const cplx* v, const cplx* aux, double min_abs2, double* out,
                 std::uint8_t* valid, std::size_t n) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  const double* vp = as_doubles(v);
  const double* ap = as_doubles(aux);
  const __m256d thr = _mm256_set1_pd(min_abs2);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d nanv = _mm256_set1_pd(nan);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v01 = _mm256_loadu_pd(vp + 2 * i);
    const __m256d v23 = _mm256_loadu_pd(vp + 2 * i + 4);
    const __m256d a01 = _mm256_loadu_pd(ap + 2 * i);
    const __m256d a23 = _mm256_loadu_pd(ap + 2 * i + 4);
    // (ar*vi, ai*vr) per complex; hsub gives ar*vi - ai*vr = -numerator.
    const __m256d x01 = _mm256_mul_pd(a01, _mm256_permute_pd(v01, 0x5));
    const __m256d x23 = _mm256_mul_pd(a23, _mm256_permute_pd(v23, 0x5));
    const __m256d neg_num = _mm256_permute4x64_pd(_mm256_hsub_pd(x01, x23), 0xD8);
    const __m256d den = _mm256_permute4x64_pd(
        _mm256_hadd_pd(_mm256_mul_pd(v01, v01), _mm256_mul_pd(v23, v23)), 0xD8);
    const __m256d ok = _mm256_and_pd(_mm256_cmp_pd(den, thr, _CMP_GE_OQ),
                                     _mm256_cmp_pd(den, zero, _CMP_GT_OQ));
    const __m256d q = _mm256_div_pd(_mm256_sub_pd(zero, neg_num), den);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(nanv, q, ok));
    const int bits = _mm256_movemask_pd(ok);
    valid[i] = static_cast<std::uint8_t>(bits & 1);
    valid[i + 1] = static_cast<std::uint8_t>((bits >> 1) & 1);
    valid[i + 2] = static_cast<std::uint8_t>((bits >> 2) & 1);
    valid[i + 3] = static_cast<std::uint8_t>((bits >> 3) & 1);
  }
  for (; i < n; ++i) {
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
  const double* src = as_doubles(in);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(src + 2 * i);
    const __m256d b = _mm256_loadu_pd(src + 2 * i + 4);
    const __m256d s = _mm256_hadd_pd(_mm256_mul_pd(a, a), _mm256_mul_pd(b, b));
    _mm256_storeu_pd(out + i, _mm256_permute4x64_pd(s, 0xD8));
  }
  for (; i < n; ++i) out[i] = in[i].real() * in[i].real() + in[i].imag() * in[i].imag();
}

void multiply(const cplx* a, const cplx* b, cplx* out, std::size_t n) {
  const double* ap = as_doubles(a);
  const double* bp = as_doubles(b);
  double* dst = as_doubles(out);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d av = _mm256_loadu_pd(ap + 2 * i);
    const __m256d bv = _mm256_loadu_pd(bp + 2 * i);
    const __m256d b_re = _mm256_movedup_pd(bv);
    const __m256d b_im = _mm256_permute_pd(bv, 0xF);
    const __m256d a_sw = _mm256_permute_pd(av, 0x5);
    _mm256_storeu_pd(dst + 2 * i, _mm256_fmaddsub_pd(av, b_re, _mm256_mul_pd(a_sw, b_im)));
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

const KernelTable& avx2_table() {
  static const KernelTable table{Isa::avx2, scale_by_real, weighted_sums, phase_ratio, abs2,
                                 multiply};
  return table;
}

}  // namespace detail

}  // namespace tfphase::simd
