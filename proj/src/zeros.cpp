#include "tfphase/zeros.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "tfphase/phasegrad.hpp"

namespace tfphase {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Jacobian from_derivatives(cplx vx, cplx vomega) {
  return {vx.real(), vomega.real(), vx.imag(), vomega.imag()};
}

int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

// Common sign of the finite entries, 0 if mixed or none.
int common_sign(const std::vector<double>& values) {
  int s = 0;
  for (const double v : values) {
    if (std::isnan(v)) continue;
    const int t = sign_of(v);
    if (t == 0) return 0;
    if (s == 0) {
      s = t;
    } else if (s != t) {
      return 0;
    }
  }
  return s;
}

// Least-squares slope of log|v| against log eps over the finite entries.
double loglog_slope(const std::vector<double>& eps, const std::vector<double>& values) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (std::isnan(values[i]) || values[i] == 0.0) continue;
    const double lx = std::log(eps[i]);
    const double ly = std::log(std::abs(values[i]));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return kNaN;
  const double den = n * sxx - sx * sx;
  return den == 0.0 ? kNaN : (n * sxy - sx * sy) / den;
}

std::size_t finite_count(const std::vector<double>& values) {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](double v) { return !std::isnan(v); }));
}

void check_profile_options(const ProfileOptions& o) {
  if (!(o.eps0 > 0.0)) throw InvalidArgument("profile eps0 must be > 0");
  if (o.n_steps < 3) throw InvalidArgument("profile needs n_steps >= 3");
  if (!(o.reference_modulus > 0.0)) {
    throw InvalidArgument("profile needs a positive reference modulus");
  }
}

std::vector<double> epsilons_for(const ProfileOptions& o) {
  std::vector<double> eps(static_cast<std::size_t>(o.n_steps));
  for (int j = 0; j < o.n_steps; ++j) eps[static_cast<std::size_t>(j)] = std::ldexp(o.eps0, -j);
  return eps;
}

// Phase derivative at p, NaN if |V| is under the threshold. d/dx is taken of
// arg V and d/dw of arg W: each convention drops the offset linear in the
// other coordinate (2 pi w for V, -2 pi x for the time reference of V).
double phase_deriv_point(const SignalBuffer& f, const WindowSpec& spec, TfPoint p,
                         PhaseDirection dir, const ProfileOptions& o) {
  const auto d = stft_point_derivatives(f, spec, p, o.truncation_radius);
  if (std::abs(d.v) < o.threshold_rel * o.reference_modulus) return kNaN;
  if (dir == PhaseDirection::d_dx) return phase_deriv_at(d.v, d.vx);
  // d/dw arg W = d/dw arg V + 2 pi x.
  return phase_deriv_at(d.v, d.vomega) + kTwoPi * p.x_s;
}

TfPoint offset(TfPoint z, bool along_time, double e) {
  return along_time ? TfPoint{z.x_s + e, z.omega_hz} : TfPoint{z.x_s, z.omega_hz + e};
}

DivergenceFit divergence_profile(const SignalBuffer& f, const WindowSpec& spec, TfPoint zero,
                                 const ProfileOptions& o, bool along_time, PhaseDirection dir) {
  check_profile_options(o);
  DivergenceFit fit;
  fit.epsilons = epsilons_for(o);
  for (const double e : fit.epsilons) {
    fit.values_below.push_back(phase_deriv_point(f, spec, offset(zero, along_time, -e), dir, o));
    fit.values_above.push_back(phase_deriv_point(f, spec, offset(zero, along_time, e), dir, o));
  }
  if (finite_count(fit.values_below) < 3 || finite_count(fit.values_above) < 3) {
    throw NumericalError("insufficient data: fewer than 3 profile points above the mask threshold");
  }
  fit.loglog_slope_below = loglog_slope(fit.epsilons, fit.values_below);
  fit.loglog_slope_above = loglog_slope(fit.epsilons, fit.values_above);
  fit.sign_below = common_sign(fit.values_below);
  fit.sign_above = common_sign(fit.values_above);
  return fit;
}

FiniteLimit finite_limit_samples(const SignalBuffer& f, const WindowSpec& spec, TfPoint zero,
                                 const ProfileOptions& o, bool along_time, PhaseDirection dir) {
  check_profile_options(o);
  FiniteLimit lim;
  lim.epsilons = epsilons_for(o);
  for (const double e : lim.epsilons) {
    const double b = phase_deriv_point(f, spec, offset(zero, along_time, -e), dir, o);
    const double a = phase_deriv_point(f, spec, offset(zero, along_time, e), dir, o);
    lim.values_below.push_back(b);
    lim.values_above.push_back(a);
    lim.symmetric.push_back(0.5 * (a + b));
  }
  std::vector<double> finite;
  for (const double s : lim.symmetric) {
    if (!std::isnan(s)) finite.push_back(s);
  }
  if (finite.size() < 3) {
    throw NumericalError("insufficient data: fewer than 3 limit samples above the mask threshold");
  }
  // Bounded: no sample exceeds a few times the scale of the outermost ones
  // (a diverging branch doubles with every halving of eps).
  // The floor, in the natural unit of the direction, keeps a limit of exactly
  // zero from turning rounding noise into a divergence.
  const double unit = along_time ? 1.0 / window_scale_s(spec) : window_scale_s(spec);
  double scale = 1e-6 * unit;
  for (const double v : {lim.symmetric.front(), lim.values_below.front(), lim.values_above.front()}) {
    if (std::isfinite(v)) scale = std::max(scale, std::abs(v));
  }
  lim.bounded = true;
  for (std::size_t j = 0; j < lim.epsilons.size(); ++j) {
    for (const double v : {lim.values_below[j], lim.values_above[j]}) {
      if (!std::isnan(v) && !(std::abs(v) <= 4.0 * scale)) lim.bounded = false;
    }
  }
  lim.last_step_change = std::abs(finite[finite.size() - 1] - finite[finite.size() - 2]);
  return lim;
}

bool dead_band(const StftGrid& v, std::size_t k, std::size_t m, std::size_t r, double floor) {
  const std::size_t k0 = k >= r ? k - r : 0;
  const std::size_t m0 = m >= r ? m - r : 0;
  const std::size_t k1 = std::min(v.bins() - 1, k + r);
  const std::size_t m1 = std::min(v.frames() - 1, m + r);
  for (std::size_t kk = k0; kk <= k1; ++kk) {
    for (std::size_t mm = m0; mm <= m1; ++mm) {
      if (std::abs(v.coeffs(kk, mm)) >= floor) return false;
    }
  }
  return true;
}

}  // namespace

double Jacobian::balanced_degeneracy() const {
  const double a = std::hypot(ux, wx);
  const double b = std::hypot(uomega, womega);
  if (a == 0.0 || b == 0.0) return 0.0;
  return std::abs(det()) / (2.0 * a * b);
}

std::vector<TfPoint> detect_zero_candidates(const StftGrid& v, const DetectOptions& options) {
  if (!(options.rel_floor > 0.0)) throw InvalidArgument("rel_floor must be > 0");
  std::vector<TfPoint> out;
  if (v.bins() < 3 || v.frames() < 3) return out;
  const double peak = v.max_abs();
  if (peak == 0.0) return out;
  const double floor = options.rel_floor * peak;
  const double contrast = options.contrast_rel * peak;

  Grid2D<double> mod(v.bins(), v.frames());
  for (std::size_t i = 0; i < mod.size(); ++i) mod.storage()[i] = std::abs(v.coeffs.storage()[i]);

  for (std::size_t k = 1; k + 1 < v.bins(); ++k) {
    for (std::size_t m = 1; m + 1 < v.frames(); ++m) {
      if (v.boundary_frame[m]) continue;
      const double c = mod(k, m);
      if (!(c < floor)) continue;
      bool minimum = true;
      for (int dk = -1; dk <= 1 && minimum; ++dk) {
        for (int dm = -1; dm <= 1; ++dm) {
          if (dk == 0 && dm == 0) continue;
          if (!(c < mod(k + dk, m + dm))) {
            minimum = false;
            break;
          }
        }
      }
      if (!minimum) continue;
      if (dead_band(v, k, m, options.contrast_radius, contrast)) continue;
      out.push_back({v.time_axis_s[m], v.freq_axis_hz[k]});
    }
  }
  return out;
}

Jacobian jacobian_at(const SignalBuffer& f, const WindowSpec& spec, TfPoint p,
                     double truncation_radius) {
  const auto d = stft_point_derivatives(f, spec, p, truncation_radius);
  return from_derivatives(d.vx, d.vomega);
}

Jacobian jacobian_finite_difference(const SignalBuffer& f, const WindowSpec& spec, TfPoint p,
                                    double hx_s, double homega_hz, double truncation_radius) {
  auto val = [&](double dx, double dw) {
    return stft_point(f, spec, WindowVariant::g, {p.x_s + dx, p.omega_hz + dw},
                      Convention::V_freq_invariant, truncation_radius);
  };
  const cplx dx = (val(hx_s, 0.0) - val(-hx_s, 0.0)) / (2.0 * hx_s);
  const cplx dw = (val(0.0, homega_hz) - val(0.0, -homega_hz)) / (2.0 * homega_hz);
  return from_derivatives(dx, dw);
}

Refinement refine_zero(const SignalBuffer& f, const WindowSpec& spec, TfPoint seed,
                       const RefineOptions& options) {
  if (!(options.reference_modulus > 0.0)) {
    throw InvalidArgument("refine_zero needs a positive reference modulus");
  }
  if (!(options.tol > 0.0)) throw InvalidArgument("refine_zero needs tol > 0");
  if (options.max_iter < 1) throw InvalidArgument("refine_zero needs max_iter >= 1");

  const double ref = options.reference_modulus;
  Refinement r;
  TfPoint p = seed;
  auto d = stft_point_derivatives(f, spec, p, options.truncation_radius);
  double res = std::abs(d.v);
  r.residual_history.push_back(res / ref);
  TfPoint best = p;
  double best_res = res;

  const TimeSpan span = supported_span(f, spec, options.truncation_radius);
  for (int it = 0; it < options.max_iter && res >= options.tol * ref; ++it) {
    // Linearize exp(2 pi i w x_p) V instead of V: same zeros, but without the
    // rotation of V along w at the rate 2 pi x_p, which for late frames shrinks
    // the basin of attraction to a fraction of a bin. Its w-derivative at x_p is
    // exp(2 pi i w x_p) (V_w + 2 pi i x_p V).
    const Jacobian j =
        from_derivatives(d.vx, d.vomega + cplx{0.0, kTwoPi} * p.x_s * d.v);
    const double det = j.det();
    if (j.balanced_degeneracy() < options.degeneracy_floor) {
      throw DegenerateZero("singular Jacobian during Newton refinement", p);
    }
    // Cramer's rule for J (dx, dw) = -(U, W).
    const double u = d.v.real();
    const double w = d.v.imag();
    const double step_x = -(u * j.womega - j.uomega * w) / det;
    const double step_w = -(j.ux * w - u * j.wx) / det;

    // Halve the step while it increases the residual.
    double lambda = 1.0;
    TfPoint next{};
    PointDerivatives nd{};
    double next_res = std::numeric_limits<double>::infinity();
    for (int h = 0; h < 20; ++h) {
      next = {p.x_s + lambda * step_x, p.omega_hz + lambda * step_w};
      if (next.x_s >= span.begin_s && next.x_s <= span.end_s) {
        nd = stft_point_derivatives(f, spec, next, options.truncation_radius);
        next_res = std::abs(nd.v);
        if (next_res < res) break;
      }
      lambda *= 0.5;
    }
    if (!(next_res < res)) break;
    p = next;
    d = nd;
    res = next_res;
    r.iterations = it + 1;
    r.residual_history.push_back(res / ref);
    if (res < best_res) {
      best_res = res;
      best = p;
    }
  }
  if (!(res < options.tol * ref)) {
    throw NonConvergence("Newton refinement did not reach the tolerance", best, best_res);
  }
  r.location = p;
  r.residual_modulus = res;
  r.jacobian = from_derivatives(d.vx, d.vomega);
  return r;
}

DivergenceFit vertical_profile(const SignalBuffer& f, const WindowSpec& spec, TfPoint zero,
                               const ProfileOptions& options) {
  return divergence_profile(f, spec, zero, options, false, PhaseDirection::d_dx);
}

DivergenceFit frequency_profile_along_x(const SignalBuffer& f, const WindowSpec& spec,
                                        TfPoint zero, const ProfileOptions& options) {
  return divergence_profile(f, spec, zero, options, true, PhaseDirection::d_domega);
}

FiniteLimit horizontal_limit(const SignalBuffer& f, const WindowSpec& spec, TfPoint zero,
                             const ProfileOptions& options) {
  if (spec.family != WindowFamily::gaussian) {
    throw UnsupportedOperation("the horizontal limit formula needs the gaussian window");
  }
  static constexpr std::array<WindowVariant, 2> vs{WindowVariant::neg_Dg, WindowVariant::D2g};
  const auto r = stft_point_variants(f, spec, vs, zero, options.truncation_radius);
  const cplx vx = r[0];
  const cplx vxx = r[1];
  const double den = 2.0 * std::norm(vx);
  if (!(den > 0.0)) {
    throw DegenerateZero("|V_x| vanishes at the zero, inconsistent with det J != 0", zero);
  }
  FiniteLimit s = finite_limit_samples(f, spec, zero, options, true, PhaseDirection::d_dx);
  s.formula = (std::conj(vx) * vxx).imag() / den;
  return s;
}

FiniteLimit frequency_limit_along_omega(const SignalBuffer& f, const WindowSpec& spec,
                                        TfPoint zero, const ProfileOptions& options) {
  if (spec.family != WindowFamily::gaussian) {
    throw UnsupportedOperation("the vertical limit formula needs the gaussian window");
  }
  static constexpr std::array<WindowVariant, 3> vs{WindowVariant::g, WindowVariant::Mg,
                                                   WindowVariant::M2g};
  const auto r = stft_point_variants(f, spec, vs, zero, options.truncation_radius);
  const double x = zero.x_s;
  const cplx minus_two_pi_i{0.0, -kTwoPi};
  const cplx vomega = minus_two_pi_i * (x * r[0] + r[1]);
  const cplx vomega2 = minus_two_pi_i * x * vomega - 4.0 * kPi * kPi * (x * r[1] + r[2]);
  const double den = 2.0 * std::norm(vomega);
  if (!(den > 0.0)) {
    throw DegenerateZero("|V_w| vanishes at the zero, inconsistent with det J != 0", zero);
  }
  FiniteLimit s = finite_limit_samples(f, spec, zero, options, false, PhaseDirection::d_domega);
  s.formula = (std::conj(vomega) * vomega2).imag() / den + kTwoPi * x;
  return s;
}

std::pair<int, int> expected_vertical_signs(DetSign s) {
  // d/dx arg V ~ -det / (e |V_w|^2) at (x0, w0 + e).
  return s == DetSign::positive ? std::pair{1, -1} : std::pair{-1, 1};
}

std::pair<int, int> expected_horizontal_signs(DetSign s) {
  // d/dw arg V ~ det / (e |V_x|^2) at (x0 + e, w0).
  return s == DetSign::positive ? std::pair{-1, 1} : std::pair{1, -1};
}

ZeroReport analyze_zero(const SignalBuffer& f, const WindowSpec& spec, TfPoint seed,
                        const AnalyzeOptions& options, double eps0_omega_hz, double eps0_x_s) {
  const Refinement r = refine_zero(f, spec, seed, options.refine);
  ZeroReport rep;
  rep.location = r.location;
  rep.residual_modulus = r.residual_modulus;
  rep.jacobian = r.jacobian;
  rep.iterations = r.iterations;
  rep.residual_history = r.residual_history;
  rep.det_sign = r.jacobian.det() > 0.0 ? DetSign::positive : DetSign::negative;
  rep.degeneracy = r.jacobian.balanced_degeneracy();
  rep.classified = rep.degeneracy > options.refine.degeneracy_floor;
  const double radius = spec.support_radius_s(options.refine.truncation_radius);
  rep.interior =
      r.location.x_s >= f.start_time_s + radius && r.location.x_s <= f.end_time_s() - radius;
  if (!rep.classified) rep.note = "degenerate";
  if (!options.profiles || !rep.classified) return rep;

  ProfileOptions po;
  po.n_steps = options.n_steps;
  po.threshold_rel = options.threshold_rel;
  po.reference_modulus = options.refine.reference_modulus;
  po.truncation_radius = options.refine.truncation_radius;
  try {
    po.eps0 = eps0_omega_hz;
    rep.vertical_profile = vertical_profile(f, spec, rep.location, po);
    po.eps0 = eps0_x_s;
    rep.omega_profile = frequency_profile_along_x(f, spec, rep.location, po);
    if (spec.family == WindowFamily::gaussian) {
      rep.horizontal = horizontal_limit(f, spec, rep.location, po);
      po.eps0 = eps0_omega_hz;
      rep.vertical_limit = frequency_limit_along_omega(f, spec, rep.location, po);
    }
  } catch (const NumericalError& e) {
    rep.note = e.what();
  }
  if (rep.vertical_profile && rep.omega_profile) {
    const auto ev = expected_vertical_signs(rep.det_sign);
    const auto eh = expected_horizontal_signs(rep.det_sign);
    rep.pattern_pass = rep.vertical_profile->sign_below == ev.first &&
                       rep.vertical_profile->sign_above == ev.second &&
                       rep.omega_profile->sign_below == eh.first &&
                       rep.omega_profile->sign_above == eh.second;
  }
  return rep;
}

std::vector<ZeroReport> analyze_zeros(const SignalBuffer& f, const StftGrid& grid,
                                      const AnalyzeOptions& options, ZeroSummary* summary) {
  if (grid.kind != GridKind::transform) {
    throw InvalidArgument("zero analysis needs a transform grid, got " + to_string(grid.kind));
  }
  const WindowSpec& spec = grid.window;
  AnalyzeOptions opt = options;
  if (!(opt.refine.reference_modulus > 0.0)) opt.refine.reference_modulus = grid.max_abs();
  if (!(opt.refine.reference_modulus > 0.0)) {
    if (summary != nullptr) *summary = {};
    return {};
  }
  const double scale = window_scale_s(spec);
  const double eps0_w = opt.eps0_omega_hz > 0.0
                            ? opt.eps0_omega_hz
                            : std::min(2.0 * grid.freq_step_hz(), 1.0 / (8.0 * scale));
  const double eps0_x =
      opt.eps0_x_s > 0.0 ? opt.eps0_x_s : std::min(2.0 * grid.time_step_s(), scale / 8.0);

  ZeroSummary sum;
  std::vector<ZeroReport> reports;
  const auto candidates = detect_zero_candidates(grid, opt.detect);
  sum.candidates = candidates.size();
  const double dt = grid.time_step_s();
  const double dw = grid.freq_step_hz();
  for (const auto& seed : candidates) {
    ZeroReport rep;
    try {
      rep = analyze_zero(f, spec, seed, opt, eps0_w, eps0_x);
    } catch (const NumericalError&) {
      ++sum.failed;
      continue;
    }
    const double jump = std::max(std::abs(rep.location.x_s - seed.x_s) / dt,
                                 std::abs(rep.location.omega_hz - seed.omega_hz) / dw);
    if (jump > opt.max_jump_cells) {
      ++sum.failed;
      continue;
    }
    const bool duplicate = std::any_of(reports.begin(), reports.end(), [&](const ZeroReport& o) {
      return std::abs(o.location.x_s - rep.location.x_s) < 0.25 * dt &&
             std::abs(o.location.omega_hz - rep.location.omega_hz) < 0.25 * dw;
    });
    if (duplicate) continue;
    reports.push_back(std::move(rep));
  }
  std::sort(reports.begin(), reports.end(), [](const ZeroReport& a, const ZeroReport& b) {
    return a.location.x_s != b.location.x_s ? a.location.x_s < b.location.x_s
                                            : a.location.omega_hz < b.location.omega_hz;
  });

  double slope_b = 0.0, slope_a = 0.0;
  std::size_t n_slopes = 0;
  sum.refined = reports.size();
  for (const auto& r : reports) {
    if (!r.classified) continue;
    ++sum.classified;
    if (!r.interior) continue;
    ++sum.classified_interior;
    if (r.pattern_pass) ++sum.pattern_pass;
    if (r.vertical_profile && std::isfinite(r.vertical_profile->loglog_slope_below) &&
        std::isfinite(r.vertical_profile->loglog_slope_above)) {
      slope_b += r.vertical_profile->loglog_slope_below;
      slope_a += r.vertical_profile->loglog_slope_above;
      ++n_slopes;
    }
  }
  sum.pass_rate = sum.classified_interior == 0
                      ? 1.0
                      : static_cast<double>(sum.pattern_pass) /
                            static_cast<double>(sum.classified_interior);
  if (n_slopes > 0) {
    sum.mean_slope_below = slope_b / static_cast<double>(n_slopes);
    sum.mean_slope_above = slope_a / static_cast<double>(n_slopes);
  }
  if (summary != nullptr) *summary = sum;
  return reports;
}

std::string to_string(DetSign s) { return s == DetSign::positive ? "positive" : "negative"; }

}  // namespace tfphase
