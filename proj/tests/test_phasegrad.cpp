#include <doctest.h>

#include <cmath>
#include <limits>

#include "tfphase/error.hpp"
#include "tfphase/oracle.hpp"
#include "tfphase/phasegrad.hpp"
#include "tfphase/signal.hpp"
#include "tfphase/stft.hpp"

using namespace tfphase;

namespace {

GridParams grid_params(std::size_t hop, std::size_t fft) {
  GridParams gp;
  gp.hop_samples = hop;
  gp.fft_size = fft;
  return gp;
}

PhaseGradGrid ratio(const DerivativeStfts& d, PhaseDirection dir, double thr = kDefaultMaskThreshold) {
  return phase_deriv_ratio(d.v, dir == PhaseDirection::d_dx ? d.vx : d.vomega, dir, thr);
}

SignalBuffer noise(std::uint64_t seed, double dur) {
  NoiseSpec ns;
  ns.seed = seed;
  return make_noise(ns, 8000, dur);
}

}  // namespace

TEST_CASE("arg branch") {
  CHECK(arg_branch({1, 0}) == 0.0);
  CHECK(arg_branch({0, 1}) == doctest::Approx(M_PI / 2));
  CHECK(arg_branch({-1, 0}) == M_PI);
  CHECK(arg_branch({-1, -0.0}) == M_PI);
  CHECK(arg_branch({-1, -1e-300}) > -M_PI);
  CHECK(arg_branch({0, -2}) == doctest::Approx(-M_PI / 2));
  CHECK_THROWS_AS(arg_branch({0, 0}), DomainError);
}

TEST_CASE("ratio at a point matches the derivative of arg") {
  // arg(z(t)) for z(t) = a + b t has derivative Im(b conj a) / |a|^2 at t = 0.
  const cplx a(0.3, -1.2), b(2.0, 0.7);
  const double h = 1e-6;
  const double fd = (arg_branch(a + b * h) - arg_branch(a - b * h)) / (2 * h);
  CHECK(phase_deriv_at(a, b) == doctest::Approx(fd).epsilon(1e-8));
  CHECK(std::isnan(phase_deriv_at({0, 0}, b)));
}

TEST_CASE("pure tone: time derivative in both conventions") {
  const double f0 = 1000;
  const SignalBuffer f = make_pure_tone(f0, 8000, 0.1);
  for (const Convention c : {Convention::V_freq_invariant, Convention::W_time_invariant}) {
    const DerivativeStfts d = derivative_stfts(f, WindowSpec::gaussian(0.005), grid_params(8, 1024), c);
    const PhaseGradGrid px = ratio(d, PhaseDirection::d_dx);
    const PhaseGradGrid pw = ratio(d, PhaseDirection::d_domega);
    const double peak = d.v.max_abs();
    std::size_t checked = 0;
    for (std::size_t m = 0; m < d.v.frames(); ++m) {
      if (d.v.boundary_frame[m]) continue;
      for (std::size_t k = 0; k < d.v.bins(); ++k) {
        if (std::abs(d.v.coeffs(k, m)) < 1e-6 * peak) continue;
        REQUIRE(px.valid(k, m));
        const double w = d.v.freq_axis_hz[k], x = d.v.time_axis_s[m];
        if (c == Convention::V_freq_invariant) {
          CHECK(std::abs(px.values(k, m) + 2 * M_PI * (w - f0)) < 1e-6 * 2 * M_PI * f0);
          CHECK(std::abs(pw.values(k, m) + 2 * M_PI * x) < 1e-6);
        } else {
          CHECK(std::abs(px.values(k, m) - 2 * M_PI * f0) < 1e-6 * 2 * M_PI * f0);
          CHECK(std::abs(pw.values(k, m)) < 1e-6);
        }
        ++checked;
      }
    }
    CHECK(checked > 1000);
  }
}

TEST_CASE("two-tone time derivative matches the closed form") {
  const SignalBuffer f = make_two_tone(500, 1500, 8000, 0.1);
  const DerivativeStfts d = derivative_stfts(f, WindowSpec::gaussian(0.005), grid_params(8, 1024),
                                             Convention::W_time_invariant);
  const PhaseGradGrid px = ratio(d, PhaseDirection::d_dx);
  const oracle::TwoToneParams p{500, 1500, 0.005};
  const double peak = d.v.max_abs();
  double worst = 0;
  for (std::size_t m = 0; m < d.v.frames(); ++m) {
    if (d.v.boundary_frame[m]) continue;
    for (std::size_t k = 0; k < d.v.bins() / 2; ++k) {
      if (std::abs(d.v.coeffs(k, m)) < 1e-3 * peak) continue;
      const double ref = oracle::two_tone_phase_deriv(p, d.v.time_axis_s[m], d.v.freq_axis_hz[k]);
      worst = std::max(worst, std::abs(px.values(k, m) - ref));
    }
  }
  CHECK(worst < 1e-6 * 2 * M_PI * 1500);

  // On the middle row the derivative is the mean frequency wherever it is defined.
  const std::size_t km = 128;  // 1000 Hz at 7.8125 Hz spacing
  REQUIRE(d.v.freq_axis_hz[km] == 1000.0);
  for (std::size_t m = 0; m < d.v.frames(); ++m) {
    if (d.v.boundary_frame[m] || !px.valid(km, m)) continue;
    CHECK(std::abs(px.values(km, m) - 2 * M_PI * 1000) < 1e-6 * 2 * M_PI * 1000);
  }
}

TEST_CASE("ratio and cartesian forms agree") {
  const SignalBuffer f = noise(21, 0.1);
  const DerivativeStfts d = derivative_stfts(f, WindowSpec::gaussian(0.004), grid_params(10, 512));
  for (const PhaseDirection dir : {PhaseDirection::d_dx, PhaseDirection::d_domega}) {
    const StftGrid& aux = dir == PhaseDirection::d_dx ? d.vx : d.vomega;
    const PhaseGradGrid a = phase_deriv_ratio(d.v, aux, dir);
    const PhaseGradGrid b = phase_deriv_cartesian(d.v, aux, dir);
    CHECK(a.mask.storage() == b.mask.storage());
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      if (!a.mask.data()[i]) continue;
      const double va = a.values.data()[i], vb = b.values.data()[i];
      CHECK(std::abs(va - vb) <= 1e-11 * std::max({1.0, std::abs(va), std::abs(vb)}));
    }
  }
}

TEST_CASE("conjugating the signal negates the time derivative and mirrors frequency") {
  SignalBuffer f = noise(8, 0.08);
  SignalBuffer g = f;
  for (auto& s : g.samples) s = std::conj(s);
  const auto spec = WindowSpec::gaussian(0.004);
  const DerivativeStfts df = derivative_stfts(f, spec, grid_params(8, 512));
  const DerivativeStfts dg = derivative_stfts(g, spec, grid_params(8, 512));
  const PhaseGradGrid pf = ratio(df, PhaseDirection::d_dx);
  const PhaseGradGrid pg = ratio(dg, PhaseDirection::d_dx);
  const std::size_t n = df.v.bins();
  for (std::size_t m = 0; m < df.v.frames(); ++m) {
    for (std::size_t k = 1; k < n; ++k) {
      if (!pf.valid(k, m) || !pg.valid(n - k, m)) continue;
      CHECK(std::abs(pg.values(n - k, m) + pf.values(k, m)) <= 1e-7 * 2 * M_PI * 4000);
    }
  }
}

TEST_CASE("convention offsets are exact") {
  const SignalBuffer f = noise(3, 0.06);
  const auto spec = WindowSpec::gaussian(0.004);
  const DerivativeStfts dv = derivative_stfts(f, spec, grid_params(12, 512), Convention::V_freq_invariant);
  const DerivativeStfts dw = derivative_stfts(f, spec, grid_params(12, 512), Convention::W_time_invariant);
  const PhaseGradGrid vx = ratio(dv, PhaseDirection::d_dx), wx = ratio(dw, PhaseDirection::d_dx);
  const PhaseGradGrid vw = ratio(dv, PhaseDirection::d_domega), ww = ratio(dw, PhaseDirection::d_domega);
  for (std::size_t m = 0; m < dv.v.frames(); ++m) {
    for (std::size_t k = 0; k < dv.v.bins(); ++k) {
      if (!vx.valid(k, m)) continue;
      const double off_x = 2 * M_PI * dv.v.freq_axis_hz[k];
      const double off_w = 2 * M_PI * dv.v.time_axis_s[m];
      CHECK(std::abs(wx.values(k, m) - vx.values(k, m) - off_x) <= 1e-8 * (std::abs(vx.values(k, m)) + off_x + 1));
      CHECK(std::abs(ww.values(k, m) - vw.values(k, m) - off_w) <= 1e-8 * (std::abs(vw.values(k, m)) + 1));
    }
  }
}

TEST_CASE("phase derivatives are invariant to a complex gain") {
  const SignalBuffer f = noise(17, 0.06);
  SignalBuffer g = f;
  const cplx gain = std::polar(3.7, 1.1);
  for (auto& s : g.samples) s *= gain;
  const auto spec = WindowSpec::gaussian(0.004);
  const DerivativeStfts df = derivative_stfts(f, spec, grid_params(12, 512));
  const DerivativeStfts dg = derivative_stfts(g, spec, grid_params(12, 512));
  for (const PhaseDirection dir : {PhaseDirection::d_dx, PhaseDirection::d_domega}) {
    const PhaseGradGrid a = ratio(df, dir), b = ratio(dg, dir);
    CHECK(a.mask.storage() == b.mask.storage());
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      if (!a.mask.data()[i]) continue;
      CHECK(std::abs(a.values.data()[i] - b.values.data()[i]) <=
            1e-9 * std::max(1.0, std::abs(a.values.data()[i])));
    }
  }
}

TEST_CASE("mask marks exactly the weak cells") {
  const SignalBuffer f = make_two_tone(500, 1500, 8000, 0.1);
  const DerivativeStfts d = derivative_stfts(f, WindowSpec::gaussian(0.005), grid_params(8, 512));
  const double thr = 1e-4;
  const PhaseGradGrid p = ratio(d, PhaseDirection::d_dx, thr);
  const double floor = thr * d.v.max_abs();
  std::size_t masked = 0;
  for (std::size_t m = 0; m < d.v.frames(); ++m) {
    for (std::size_t k = 0; k < d.v.bins(); ++k) {
      const double mod = std::abs(d.v.coeffs(k, m));
      if (std::abs(mod - floor) < 1e-9 * floor) continue;  // rounding at the edge
      CHECK(p.valid(k, m) == (mod >= floor));
      if (!p.valid(k, m)) {
        CHECK(std::isnan(p.values(k, m)));
        ++masked;
      }
    }
  }
  CHECK(masked > 0);
  CHECK(p.valid_count() + masked <= p.values.size());
  CHECK(p.threshold_rel == thr);
}

TEST_CASE("ratio route rejects mismatched grids") {
  const SignalBuffer f = make_pure_tone(300, 8000, 0.05);
  const DerivativeStfts d = derivative_stfts(f, WindowSpec::gaussian(0.004), grid_params(8, 512));
  CHECK_THROWS_AS(phase_deriv_ratio(d.v, d.vomega, PhaseDirection::d_dx), InvalidArgument);
  CHECK_THROWS_AS(phase_deriv_ratio(d.vx, d.vx, PhaseDirection::d_dx), InvalidArgument);
  CHECK_THROWS_AS(phase_deriv_ratio(d.v, d.vx, PhaseDirection::d_dx, -1.0), InvalidArgument);
  const DerivativeStfts other = derivative_stfts(f, WindowSpec::gaussian(0.004), grid_params(4, 512));
  CHECK_THROWS_AS(phase_deriv_ratio(d.v, other.vx, PhaseDirection::d_dx), InvalidArgument);
  CHECK_THROWS_AS(phase_deriv_unwrap(d.vx, PhaseDirection::d_dx), InvalidArgument);
  CHECK(parse_phase_direction("omega") == PhaseDirection::d_domega);
  CHECK_THROWS_AS(parse_phase_direction("sideways"), InvalidArgument);
}

TEST_CASE("unwrap route on a pure tone is exact") {
  const double f0 = 1000;
  const SignalBuffer f = make_pure_tone(f0, 8000, 0.1);
  const StftGrid v = stft_grid(f, WindowSpec::gaussian(0.005), WindowVariant::g, grid_params(8, 1024),
                               Convention::V_freq_invariant);
  const PhaseGradGrid px = phase_deriv_unwrap(v, PhaseDirection::d_dx);
  const PhaseGradGrid pw = phase_deriv_unwrap(v, PhaseDirection::d_domega);
  std::size_t checked = 0;
  for (std::size_t m = 0; m < v.frames(); ++m) {
    if (v.boundary_frame[m]) continue;
    for (std::size_t k = 0; k < v.bins(); ++k) {
      if (px.valid(k, m)) {
        CHECK(std::abs(px.values(k, m) + 2 * M_PI * (v.freq_axis_hz[k] - f0)) < 1e-6 * 2 * M_PI * f0);
        ++checked;
      }
      if (pw.valid(k, m)) CHECK(std::abs(pw.values(k, m) + 2 * M_PI * v.time_axis_s[m]) < 1e-6);
    }
  }
  CHECK(checked > 1000);
  // The tone's own row is always usable.
  CHECK(px.valid(128, v.frames() / 2));
}

TEST_CASE("unwrap route of a constant signal") {
  const SignalBuffer f = make_pure_tone(0, 8000, 0.05);
  const StftGrid v = stft_grid(f, WindowSpec::gaussian(0.004), WindowVariant::g, grid_params(8, 512),
                               Convention::V_freq_invariant);
  const PhaseGradGrid px = phase_deriv_unwrap(v, PhaseDirection::d_dx);
  for (std::size_t m = 0; m < v.frames(); ++m) {
    if (px.valid(0, m)) CHECK(std::abs(px.values(0, m)) < 1e-9);
  }
  CHECK(px.valid(0, v.frames() / 2));
}

TEST_CASE("unwrap and ratio routes agree on noise where the unwrap is resolved") {
  const SignalBuffer f = noise(5, 0.25);
  const DerivativeStfts d = derivative_stfts(f, WindowSpec::gaussian(0.005), grid_params(4, 1024));
  for (const PhaseDirection dir : {PhaseDirection::d_dx, PhaseDirection::d_domega}) {
    CAPTURE(to_string(dir));
    const PhaseGradGrid r = ratio(d, dir);
    const PhaseGradGrid u = phase_deriv_unwrap(d.v, dir);
    const double h = dir == PhaseDirection::d_dx ? d.v.time_step_s() : d.v.freq_step_hz();
    const double bound = 0.01 * M_PI / h;
    std::size_t both = 0, bad = 0, interior = 0;
    for (std::size_t m = 0; m < d.v.frames(); ++m) {
      if (d.v.boundary_frame[m]) continue;
      for (std::size_t k = 0; k < d.v.bins(); ++k) {
        ++interior;
        if (!u.valid(k, m) || !r.valid(k, m)) continue;
        ++both;
        if (std::abs(u.values(k, m) - r.values(k, m)) > bound) ++bad;
      }
    }
    CHECK(bad == 0);
    CHECK(static_cast<double>(both) / static_cast<double>(interior) > 0.6);
  }
}

TEST_CASE("unwrap masks an unresolved zero") {
  // The two-tone zeros lie on the 1000 Hz row; a coarse hop cannot resolve the
  // phase jump there, so cells next to them must not report a value.
  const SignalBuffer f = make_two_tone(500, 1500, 8000, 0.1);
  const StftGrid v = stft_grid(f, WindowSpec::gaussian(0.005), WindowVariant::g, grid_params(4, 1024),
                               Convention::W_time_invariant);
  const PhaseGradGrid u = phase_deriv_unwrap(v, PhaseDirection::d_dx);
  const oracle::TwoToneParams p{500, 1500, 0.005};
  const double bound = 0.01 * M_PI / v.time_step_s();
  for (std::size_t m = 0; m < v.frames(); ++m) {
    if (v.boundary_frame[m]) continue;
    for (std::size_t k = 100; k < 156; ++k) {
      if (!u.valid(k, m)) continue;
      double ref = 0;
      try {
        ref = oracle::two_tone_phase_deriv(p, v.time_axis_s[m], v.freq_axis_hz[k]);
      } catch (const DomainError&) {
        FAIL("a lattice zero was reported valid");
      }
      CHECK(std::abs(u.values(k, m) - ref) <= bound);
    }
  }
}
