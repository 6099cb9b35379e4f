#include "tfphase/phasegrad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tfphase/error.hpp"
#include "tfphase/simd/kernels.hpp"

namespace tfphase {

namespace {

GridKind kind_for(PhaseDirection d) {
  return d == PhaseDirection::d_dx ? GridKind::d_dx : GridKind::d_domega;
}

void check_pair(const StftGrid& v, const StftGrid& aux, PhaseDirection direction,
                double threshold_rel) {
  require_same_axes(v, aux);
  if (v.kind != GridKind::transform) {
    throw InvalidArgument("first grid must hold the transform, got " + to_string(v.kind));
  }
  if (aux.kind != kind_for(direction)) {
    throw InvalidArgument("auxiliary grid holds " + to_string(aux.kind) + " but direction is " +
                          to_string(direction));
  }
  if (!(threshold_rel >= 0.0)) throw InvalidArgument("threshold_rel must be >= 0");
}

PhaseGradGrid empty_like(const StftGrid& v, PhaseDirection direction, double threshold_rel) {
  PhaseGradGrid out;
  out.values = Grid2D<double>(v.bins(), v.frames(), std::numeric_limits<double>::quiet_NaN());
  out.mask = Grid2D<std::uint8_t>(v.bins(), v.frames(), 0);
  out.threshold_rel = threshold_rel;
  out.direction = direction;
  out.convention = v.convention;
  out.time_axis_s = v.time_axis_s;
  out.freq_axis_hz = v.freq_axis_hz;
  return out;
}

double min_abs2(const StftGrid& v, double threshold_rel) {
  const double floor = threshold_rel * v.max_abs();
  return floor * floor;
}

double wrap_pi(double a) { return std::remainder(a, kTwoPi); }

}  // namespace

std::size_t PhaseGradGrid::valid_count() const {
  return static_cast<std::size_t>(std::count(mask.storage().begin(), mask.storage().end(), 1));
}

double arg_branch(cplx z) {
  if (z == cplx{}) throw DomainError("argument of zero is undefined");
  const double a = std::atan2(z.imag(), z.real());
  // atan2 gives -pi for (-1, -0.0); the branch is (-pi, pi].
  return a == -kPi ? kPi : a;
}

double phase_deriv_at(cplx v, cplx aux) {
  const double n = std::norm(v);
  if (n == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (aux.imag() * v.real() - aux.real() * v.imag()) / n;
}

PhaseGradGrid phase_deriv_ratio(const StftGrid& v, const StftGrid& aux, PhaseDirection direction,
                                double threshold_rel) {
  check_pair(v, aux, direction, threshold_rel);
  PhaseGradGrid out = empty_like(v, direction, threshold_rel);
  simd::kernels().phase_ratio(v.coeffs.data(), aux.coeffs.data(), min_abs2(v, threshold_rel),
                              out.values.data(), out.mask.data(), v.coeffs.size());
  return out;
}

PhaseGradGrid phase_deriv_cartesian(const StftGrid& v, const StftGrid& aux,
                                    PhaseDirection direction, double threshold_rel) {
  check_pair(v, aux, direction, threshold_rel);
  PhaseGradGrid out = empty_like(v, direction, threshold_rel);
  const double floor2 = min_abs2(v, threshold_rel);
  const auto& vs = v.coeffs.storage();
  const auto& as = aux.coeffs.storage();
  auto& values = out.values.storage();
  auto& mask = out.mask.storage();
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const double u = vs[i].real();
    const double w = vs[i].imag();
    const double ud = as[i].real();
    const double wd = as[i].imag();
    const double den = u * u + w * w;
    if (den == 0.0 || den < floor2) continue;
    values[i] = (u * wd - w * ud) / den;
    mask[i] = 1;
  }
  return out;
}

PhaseGradGrid phase_deriv_unwrap(const StftGrid& v, PhaseDirection direction,
                                 const UnwrapOptions& options) {
  if (v.kind != GridKind::transform) {
    throw InvalidArgument("unwrap route needs a transform grid, got " + to_string(v.kind));
  }
  if (!(options.threshold_rel >= 0.0)) throw InvalidArgument("threshold_rel must be >= 0");
  PhaseGradGrid out = empty_like(v, direction, options.threshold_rel);

  // Difference in the convention whose phase varies slowly along the line
  // (V along time, W along frequency), then shift by the exact offset.
  const bool along_time = direction == PhaseDirection::d_dx;
  const Convention work = along_time ? Convention::V_freq_invariant : Convention::W_time_invariant;
  const StftGrid g = v.convention == work ? v : convert_convention(v, work);

  const double floor2 = min_abs2(v, options.threshold_rel);
  const std::size_t lines = along_time ? g.bins() : g.frames();
  const std::size_t len = along_time ? g.frames() : g.bins();
  const double h = along_time ? g.time_step_s() : g.freq_step_hz();
  const double wrap_limit = kPi * (1.0 - 1e-6);

  std::vector<double> phase(len);
  std::vector<double> logmod(len);
  std::vector<std::uint8_t> strong(len);
  std::vector<double> inc(len > 0 ? len - 1 : 0);
  std::vector<std::uint8_t> inc_ok(inc.size());

  for (std::size_t line = 0; line < lines; ++line) {
    auto at = [&](std::size_t j) -> cplx {
      return along_time ? g.coeffs(line, j) : g.coeffs(j, line);
    };
    for (std::size_t j = 0; j < len; ++j) {
      const cplx z = at(j);
      const double n = std::norm(z);
      strong[j] = (n != 0.0 && n >= floor2) ? 1 : 0;
      phase[j] = strong[j] ? std::arg(z) : 0.0;
      logmod[j] = strong[j] ? 0.5 * std::log(n) : 0.0;
    }
    for (std::size_t j = 0; j + 1 < len; ++j) {
      inc[j] = wrap_pi(phase[j + 1] - phase[j]);
      inc_ok[j] = (strong[j] && strong[j + 1] && std::abs(inc[j]) < wrap_limit) ? 1 : 0;
    }
    // Complex increments of log V: the modulus part sees an unresolved zero
    // even when the phase increments around it happen to cancel.
    auto step = [&](std::size_t j) { return cplx(logmod[j + 1] - logmod[j], inc[j]); };
    for (std::size_t j = 0; j < len; ++j) {
      if (!strong[j] || len < 2) continue;
      double d = 0.0;
      double err = 0.0;  // estimated error times the spacing
      if (j == 0 || j + 1 == len) {
        // One-sided: error h phi'' / 2, (log V)'' h^2 from two increments.
        if (len < 3) continue;
        const std::size_t e = (j == 0) ? 0 : j - 1;
        const std::size_t e2 = (j == 0) ? 1 : j - 2;
        if (!inc_ok[e] || !inc_ok[e2]) continue;
        d = inc[e] / h;
        err = 0.5 * std::abs(step(e) - step(e2));
      } else {
        // Central: error h^2 phi''' / 6, (log V)''' h^3 from four increments.
        if (j < 2 || j + 2 >= len) continue;
        if (!inc_ok[j - 2] || !inc_ok[j - 1] || !inc_ok[j] || !inc_ok[j + 1]) continue;
        d = 0.5 * (inc[j - 1] + inc[j]) / h;
        err = std::abs(step(j + 1) - step(j) - step(j - 1) + step(j - 2)) / 12.0;
      }
      if (err > options.max_error_fraction * kPi) continue;
      const std::size_t k = along_time ? line : j;
      const std::size_t m = along_time ? j : line;
      if (v.convention != work) {
        // d_dx: arg W = arg V + 2 pi w x; d_domega: arg V = arg W - 2 pi w x.
        d += along_time ? kTwoPi * v.freq_axis_hz[k] : -kTwoPi * v.time_axis_s[m];
      }
      out.values(k, m) = d;
      out.mask(k, m) = 1;
    }
  }
  return out;
}

std::string to_string(PhaseDirection d) { return d == PhaseDirection::d_dx ? "d_dx" : "d_domega"; }

PhaseDirection parse_phase_direction(const std::string& name) {
  if (name == "d_dx" || name == "x" || name == "time") return PhaseDirection::d_dx;
  if (name == "d_domega" || name == "omega" || name == "freq") return PhaseDirection::d_domega;
  throw InvalidArgument("unknown phase-derivative direction '" + name + "'");
}

}  // namespace tfphase
