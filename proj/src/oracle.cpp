#include "tfphase/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "tfphase/error.hpp"

namespace tfphase::oracle {

namespace {

double gauss(double sigma_s, double u) { return std::exp(-kTwoPi * sigma_s * sigma_s * u * u); }

}  // namespace

void TwoToneParams::validate() const {
  if (!std::isfinite(omega1_hz) || !std::isfinite(omega2_hz)) {
    throw InvalidArgument("tone frequencies must be finite");
  }
  if (omega1_hz == omega2_hz) throw InvalidArgument("tone frequencies must differ");
  if (!(sigma_s > 0.0) || !std::isfinite(sigma_s)) throw InvalidArgument("sigma_s must be > 0");
}

double TwoToneParams::s_at(double omega_hz) const {
  return 2.0 * kTwoPi * sigma_s * sigma_s * (omega_hz - omega_m_hz()) * delta_hz();
}

double gaussian_window_mass(double sigma_s) {
  if (!(sigma_s > 0.0)) throw InvalidArgument("sigma_s must be > 0");
  return sigma_s * std::sqrt(2.0);
}

cplx two_tone_stft(const TwoToneParams& p, double x_s, double omega_hz, Convention convention) {
  p.validate();
  cplx w = cis_cycles(x_s * p.omega1_hz) * gauss(p.sigma_s, omega_hz - p.omega1_hz) +
           cis_cycles(x_s * p.omega2_hz) * gauss(p.sigma_s, omega_hz - p.omega2_hz);
  if (convention == Convention::V_freq_invariant) w *= cis_cycles(-omega_hz * x_s);
  return w;
}

std::vector<TfPoint> two_tone_zero_lattice(const TwoToneParams& p, int k_min, int k_max) {
  p.validate();
  std::vector<TfPoint> out;
  if (k_max < k_min) return out;
  const double denom = 2.0 * (p.omega1_hz - p.omega2_hz);
  for (int k = k_min; k <= k_max; ++k) {
    out.push_back({(1.0 + 2.0 * k) / denom, p.omega_m_hz()});
  }
  std::sort(out.begin(), out.end(), [](const TfPoint& a, const TfPoint& b) { return a.x_s < b.x_s; });
  return out;
}

std::vector<TfPoint> two_tone_zeros_between(const TwoToneParams& p, double x_begin, double x_end) {
  p.validate();
  // x_k = (k + 1/2) / (w1 - w2); solve for the k range covering the interval.
  const double d = p.omega1_hz - p.omega2_hz;
  const double ka = x_begin * d - 0.5;
  const double kb = x_end * d - 0.5;
  const int k_lo = static_cast<int>(std::floor(std::min(ka, kb))) - 1;
  const int k_hi = static_cast<int>(std::ceil(std::max(ka, kb))) + 1;
  std::vector<TfPoint> out;
  for (const auto& z : two_tone_zero_lattice(p, k_lo, k_hi)) {
    if (z.x_s >= x_begin && z.x_s <= x_end) out.push_back(z);
  }
  return out;
}

double two_tone_phase_deriv(const TwoToneParams& p, double x_s, double omega_hz) {
  p.validate();
  const double s = p.s_at(omega_hz);
  const double th = std::tanh(s);
  const double t = kTwoPi * p.delta_hz() * x_s;
  const double c = std::cos(t);
  const double sn = std::sin(t);
  if (s == 0.0) {
    // On the zero set cos t vanishes; 2 delta x - 1/2 is then an integer.
    const double turns = 2.0 * p.delta_hz() * x_s - 0.5;
    if (std::abs(turns - std::nearbyint(turns)) < 1e-12) {
      throw DomainError("phase derivative is undefined at a zero of the transform");
    }
    return kTwoPi * p.omega_m_hz();
  }
  const double ratio = th / (c * c + sn * sn * th * th);
  return kTwoPi * (p.omega_m_hz() + p.delta_hz() * ratio);
}

cplx pure_tone_stft(double f0_hz, double sigma_s, double x_s, double omega_hz,
                    Convention convention) {
  const double u = omega_hz - f0_hz;
  cplx v = gaussian_window_mass(sigma_s) * gauss(sigma_s, u) * cis_cycles(-u * x_s);
  if (convention == Convention::W_time_invariant) v *= cis_cycles(omega_hz * x_s);
  return v;
}

}  // namespace tfphase::oracle
