#pragma once

// Closed-form transforms of the two-tone and pure-tone signals under the
// Gaussian window g(t) = exp(-pi t^2 / (2 sigma^2)). Deliberately independent
// of the numerical transform code.

#include <vector>

#include "tfphase/common.hpp"

namespace tfphase::oracle {

struct TwoToneParams {
  double omega1_hz = 0.0;
  double omega2_hz = 0.0;
  double sigma_s = 0.0;

  void validate() const;
  double delta_hz() const { return 0.5 * (omega2_hz - omega1_hz); }
  double omega_m_hz() const { return 0.5 * (omega1_hz + omega2_hz); }
  // s = 4 pi sigma^2 (w - w_m) delta
  double s_at(double omega_hz) const;
};

// Integral of the window, sigma sqrt(2). The closed form below omits it; a
// numerical transform of the same signal equals mass times the closed form.
double gaussian_window_mass(double sigma_s);

// exp(2 pi i x w1) exp(-2 pi sigma^2 (w - w1)^2) + (same for w2) in the W
// convention; the V value carries an extra exp(-2 pi i w x).
cplx two_tone_stft(const TwoToneParams& p, double x_s, double omega_hz,
                   Convention convention = Convention::W_time_invariant);

// x_k = (1 + 2k) / (2 (w1 - w2)) at w_m, for k_min <= k <= k_max, sorted by x.
std::vector<TfPoint> two_tone_zero_lattice(const TwoToneParams& p, int k_min, int k_max);

// Lattice points with x in [x_begin, x_end], sorted by x.
std::vector<TfPoint> two_tone_zeros_between(const TwoToneParams& p, double x_begin, double x_end);

// d/dx arg W in rad/s:
// 2 pi (w_m + delta tanh(s) (1 + tan^2 t) / (1 + tan^2 t tanh^2 s)), t = 2 pi delta x,
// evaluated as tanh(s) / (cos^2 t + sin^2 t tanh^2 s), which has no pole.
// Throws DomainError on the zero set.
double two_tone_phase_deriv(const TwoToneParams& p, double x_s, double omega_hz);

// sigma sqrt(2) exp(-2 pi sigma^2 (w - f0)^2) exp(-2 pi i (w - f0) x) in V;
// W multiplies by exp(2 pi i w x).
cplx pure_tone_stft(double f0_hz, double sigma_s, double x_s, double omega_hz,
                    Convention convention = Convention::V_freq_invariant);

}  // namespace tfphase::oracle
