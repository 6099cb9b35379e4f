#include "tfphase/stft.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "tfphase/error.hpp"
#include "tfphase/fft.hpp"
#include "tfphase/simd/kernels.hpp"

namespace tfphase {

namespace {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Turns of exp(2 pi i w_k x_m) with w_k = k fs / N and x_m = t0 + m hop / fs.
// The integer part k * m * hop is reduced modulo N exactly.
double lattice_cycles(std::size_t k, std::size_t frame_sample, std::size_t fft_size,
                      double start_time_s, double sample_rate_hz) {
  const auto kk = static_cast<std::uint64_t>(k);
  const auto cm = static_cast<std::uint64_t>(frame_sample) % fft_size;
  const std::uint64_t num = (kk * cm) % fft_size;
  double cycles = static_cast<double>(num) / static_cast<double>(fft_size);
  if (start_time_s != 0.0) {
    cycles += static_cast<double>(k) * sample_rate_hz * start_time_s / static_cast<double>(fft_size);
  }
  return cycles;
}

StftGrid grid_skeleton(const SignalBuffer& f, const WindowSpec& spec, WindowVariant variant,
                       const GridParams& params, std::ptrdiff_t radius) {
  StftGrid grid;
  grid.window = spec;
  grid.variant_used = variant;
  grid.sample_rate_hz = f.sample_rate_hz;
  grid.hop_samples = params.hop_samples;
  grid.truncation_radius = params.truncation_radius;
  grid.fft_size = params.fft_size != 0
                      ? params.fft_size
                      : default_fft_size(spec, f.sample_rate_hz, params.truncation_radius);
  const auto support = static_cast<std::size_t>(2 * radius + 1);
  if (grid.fft_size < support) {
    throw InvalidArgument("window support of " + std::to_string(support) +
                          " samples is longer than fft_size " + std::to_string(grid.fft_size));
  }

  const std::size_t n = f.size();
  const std::size_t frames = (n - 1) / params.hop_samples + 1;
  grid.time_axis_s.resize(frames);
  grid.boundary_frame.resize(frames);
  for (std::size_t m = 0; m < frames; ++m) {
    const std::size_t c = m * params.hop_samples;
    grid.time_axis_s[m] = f.time_at(static_cast<std::ptrdiff_t>(c));
    const auto ci = static_cast<std::ptrdiff_t>(c);
    grid.boundary_frame[m] =
        (ci - radius < 0 || ci + radius > static_cast<std::ptrdiff_t>(n) - 1) ? 1 : 0;
  }
  grid.freq_axis_hz.resize(grid.fft_size);
  for (std::size_t k = 0; k < grid.fft_size; ++k) {
    grid.freq_axis_hz[k] =
        static_cast<double>(k) * f.sample_rate_hz / static_cast<double>(grid.fft_size);
  }
  grid.coeffs = Grid2D<cplx>(grid.fft_size, frames);
  return grid;
}

// V-convention grid for one window variant.
StftGrid compute_v_grid(const SignalBuffer& f, const WindowSpec& spec, WindowVariant variant,
                        const GridParams& params) {
  f.validate();
  spec.validate();
  require_variant_supported(spec, variant);
  if (params.hop_samples < 1) throw InvalidArgument("hop_samples must be >= 1");

  const SampledWindow win =
      sample_window(spec, variant, f.sample_rate_hz, params.truncation_radius);
  const std::ptrdiff_t radius = win.radius();
  StftGrid grid = grid_skeleton(f, spec, variant, params, radius);
  grid.convention = Convention::V_freq_invariant;

  const auto& k = simd::kernels();
  const std::size_t nfft = grid.fft_size;
  const auto n = static_cast<std::ptrdiff_t>(f.size());
  const double inv_fs = 1.0 / f.sample_rate_hz;
  const double t0 = f.start_time_s;

  FftPlan plan(nfft, FftPlan::Direction::forward);
  std::vector<cplx> phasor(nfft);
  std::vector<cplx> column(nfft);

  for (std::size_t m = 0; m < grid.frames(); ++m) {
    const auto c = static_cast<std::ptrdiff_t>(m * params.hop_samples);
    auto buf = plan.input();
    std::fill(buf.begin(), buf.end(), cplx{});
    const std::ptrdiff_t jlo = std::max(-radius, -c);
    const std::ptrdiff_t jhi = std::min(radius, n - 1 - c);
    // Offsets j < 0 wrap to the end of the FFT buffer, j >= 0 start at 0.
    if (jlo < 0) {
      const std::ptrdiff_t count = std::min<std::ptrdiff_t>(0, jhi + 1) - jlo;
      if (count > 0) {
        k.scale_by_real(f.samples.data() + (c + jlo), win.values.data() + (radius + jlo), inv_fs,
                        buf.data() + (static_cast<std::ptrdiff_t>(nfft) + jlo),
                        static_cast<std::size_t>(count));
      }
    }
    if (jhi >= 0) {
      const std::ptrdiff_t from = std::max<std::ptrdiff_t>(0, jlo);
      k.scale_by_real(f.samples.data() + (c + from), win.values.data() + (radius + from), inv_fs,
                      buf.data() + from, static_cast<std::size_t>(jhi - from + 1));
    }
    plan.execute_in_place();

    // The FFT yields the time-invariant value; rotate to V.
    for (std::size_t kk = 0; kk < nfft; ++kk) {
      phasor[kk] =
          cis_cycles(-lattice_cycles(kk, static_cast<std::size_t>(c), nfft, t0, f.sample_rate_hz));
    }
    k.multiply(plan.output().data(), phasor.data(), column.data(), nfft);
    for (std::size_t kk = 0; kk < nfft; ++kk) grid.coeffs(kk, m) = column[kk];
  }
  return grid;
}

void apply_phasor(StftGrid& grid, double sign) {
  const auto& k = simd::kernels();
  const std::size_t frame_count = grid.frames();
  std::vector<cplx> phasor(frame_count);
  const double t0 = grid.time_axis_s.empty() ? 0.0 : grid.time_axis_s.front();
  for (std::size_t kk = 0; kk < grid.bins(); ++kk) {
    for (std::size_t m = 0; m < frame_count; ++m) {
      phasor[m] = cis_cycles(sign * lattice_cycles(kk, m * grid.hop_samples, grid.fft_size, t0,
                                                   grid.sample_rate_hz));
    }
    k.multiply(grid.coeffs.row(kk), phasor.data(), grid.coeffs.row(kk), frame_count);
  }
}

}  // namespace

std::size_t default_fft_size(const WindowSpec& spec, double sample_rate_hz,
                             double truncation_radius) {
  const auto radius = support_radius_samples(spec, sample_rate_hz, truncation_radius);
  return next_pow2(4 * static_cast<std::size_t>(2 * radius + 1));
}

double StftGrid::max_abs() const {
  double best = 0.0;
  for (const auto& v : coeffs.storage()) best = std::max(best, std::norm(v));
  return std::sqrt(best);
}

void require_same_axes(const StftGrid& a, const StftGrid& b) {
  if (a.time_axis_s != b.time_axis_s || a.freq_axis_hz != b.freq_axis_hz ||
      a.coeffs.rows() != b.coeffs.rows() || a.coeffs.cols() != b.coeffs.cols()) {
    throw InvalidArgument("grids do not share the same time-frequency axes");
  }
  if (a.convention != b.convention) {
    throw InvalidArgument("grids use different conventions");
  }
}

StftGrid stft_grid(const SignalBuffer& f, const WindowSpec& spec, WindowVariant variant,
                   const GridParams& params, Convention convention) {
  StftGrid grid = compute_v_grid(f, spec, variant, params);
  if (convention == Convention::W_time_invariant) return convert_convention(grid, convention);
  return grid;
}

cplx convention_phasor(const StftGrid& grid, std::size_t k, std::size_t m) {
  const double t0 = grid.time_axis_s.empty() ? 0.0 : grid.time_axis_s.front();
  return cis_cycles(
      lattice_cycles(k, m * grid.hop_samples, grid.fft_size, t0, grid.sample_rate_hz));
}

StftGrid convert_convention(const StftGrid& grid, Convention target) {
  StftGrid out = grid;
  if (grid.convention == target) return out;
  apply_phasor(out, target == Convention::W_time_invariant ? 1.0 : -1.0);
  out.convention = target;
  return out;
}

TimeSpan supported_span(const SignalBuffer& f, const WindowSpec& spec, double truncation_radius) {
  f.validate();
  const double r = spec.support_radius_s(truncation_radius);
  return {f.start_time_s - r, f.end_time_s() + r};
}

std::vector<cplx> stft_point_variants(const SignalBuffer& f, const WindowSpec& spec,
                                      std::span<const WindowVariant> variants, const TfPoint& p,
                                      double truncation_radius) {
  f.validate();
  spec.validate();
  for (const auto v : variants) require_variant_supported(spec, v);
  if (!std::isfinite(p.x_s) || !std::isfinite(p.omega_hz)) {
    throw InvalidArgument("time-frequency point must be finite");
  }
  const TimeSpan span = supported_span(f, spec, truncation_radius);
  if (p.x_s < span.begin_s || p.x_s > span.end_s) {
    throw InvalidArgument("point x = " + std::to_string(p.x_s) +
                          " s lies outside the supported span");
  }

  const double fs = f.sample_rate_hz;
  const double radius_s = spec.support_radius_s(truncation_radius) * (1.0 + 1e-12);
  // Position of x in samples, relative to the first sample.
  const double xs = (p.x_s - f.start_time_s) * fs;
  const auto last = static_cast<std::ptrdiff_t>(f.size()) - 1;
  const auto lo = std::max<std::ptrdiff_t>(
      0, static_cast<std::ptrdiff_t>(std::ceil(xs - radius_s * fs)));
  const auto hi = std::min<std::ptrdiff_t>(
      last, static_cast<std::ptrdiff_t>(std::floor(xs + radius_s * fs)));

  std::vector<cplx> result(variants.size());
  if (hi < lo) return result;

  const auto count = static_cast<std::size_t>(hi - lo + 1);
  std::vector<cplx> z(count);
  std::vector<double> weights(variants.size() * count);
  std::vector<double> scratch(variants.size());
  for (std::size_t i = 0; i < count; ++i) {
    const auto nidx = lo + static_cast<std::ptrdiff_t>(i);
    const double tau = (static_cast<double>(nidx) - xs) / fs;  // t_n - x
    z[i] = f.samples[static_cast<std::size_t>(nidx)] * cis_cycles(-p.omega_hz * tau);
    window_values(spec, variants, tau, scratch, truncation_radius);
    for (std::size_t v = 0; v < variants.size(); ++v) weights[v * count + i] = scratch[v];
  }
  std::vector<const double*> rows(variants.size());
  for (std::size_t v = 0; v < variants.size(); ++v) rows[v] = weights.data() + v * count;
  simd::kernels().weighted_sums(z.data(), rows.data(), variants.size(), count, result.data());

  // Sums are time-invariant values; rotate to V and apply the 1/fs weight.
  const cplx to_v = cis_cycles(-p.omega_hz * p.x_s) / fs;
  for (auto& r : result) r *= to_v;
  return result;
}

cplx stft_point(const SignalBuffer& f, const WindowSpec& spec, WindowVariant variant,
                const TfPoint& p, Convention convention, double truncation_radius) {
  const std::array<WindowVariant, 1> vs{variant};
  cplx v = stft_point_variants(f, spec, vs, p, truncation_radius)[0];
  if (convention == Convention::W_time_invariant) v *= cis_cycles(p.omega_hz * p.x_s);
  return v;
}

PointDerivatives stft_point_derivatives(const SignalBuffer& f, const WindowSpec& spec,
                                        const TfPoint& p, double truncation_radius) {
  if (!spec.differentiable()) {
    throw UnsupportedOperation("derivative transforms need a differentiable window, got " +
                               to_string(spec.family));
  }
  static constexpr std::array<WindowVariant, 3> vs{WindowVariant::g, WindowVariant::neg_Dg,
                                                   WindowVariant::Mg};
  const auto r = stft_point_variants(f, spec, vs, p, truncation_radius);
  const cplx minus_two_pi_i{0.0, -kTwoPi};
  return {r[0], r[1], minus_two_pi_i * (p.x_s * r[0] + r[2])};
}

DerivativeStfts derivative_stfts(const SignalBuffer& f, const WindowSpec& spec,
                                 const GridParams& params, Convention convention) {
  if (!spec.differentiable()) {
    throw UnsupportedOperation("derivative transforms need a differentiable window, got " +
                               to_string(spec.family));
  }
  DerivativeStfts out;
  out.v = compute_v_grid(f, spec, WindowVariant::g, params);
  out.vx = compute_v_grid(f, spec, WindowVariant::neg_Dg, params);
  out.vx.kind = GridKind::d_dx;

  StftGrid vomega = compute_v_grid(f, spec, WindowVariant::Mg, params);
  const cplx minus_two_pi_i{0.0, -kTwoPi};
  for (std::size_t k = 0; k < vomega.bins(); ++k) {
    for (std::size_t m = 0; m < vomega.frames(); ++m) {
      vomega.coeffs(k, m) =
          minus_two_pi_i * (out.v.time_axis_s[m] * out.v.coeffs(k, m) + vomega.coeffs(k, m));
    }
  }
  vomega.kind = GridKind::d_domega;
  out.vomega = std::move(vomega);

  if (convention == Convention::W_time_invariant) {
    // Derivatives of W = exp(2 pi i w x) V, by the product rule:
    // W_x = e (V_x + 2 pi i w V), W_w = e (V_w + 2 pi i x V).
    const cplx two_pi_i{0.0, kTwoPi};
    for (std::size_t k = 0; k < out.v.bins(); ++k) {
      for (std::size_t m = 0; m < out.v.frames(); ++m) {
        const cplx v = out.v.coeffs(k, m);
        out.vx.coeffs(k, m) += two_pi_i * out.v.freq_axis_hz[k] * v;
        out.vomega.coeffs(k, m) += two_pi_i * out.v.time_axis_s[m] * v;
      }
    }
    out.v = convert_convention(out.v, convention);
    out.vx = convert_convention(out.vx, convention);
    out.vomega = convert_convention(out.vomega, convention);
  }
  return out;
}

std::string to_string(Convention c) {
  return c == Convention::V_freq_invariant ? "V" : "W";
}

Convention parse_convention(const std::string& name) {
  if (name == "V" || name == "v" || name == "V_freq_invariant") return Convention::V_freq_invariant;
  if (name == "W" || name == "w" || name == "W_time_invariant") return Convention::W_time_invariant;
  throw InvalidArgument("unknown convention '" + name + "' (expected V or W)");
}

std::string to_string(GridKind kind) {
  switch (kind) {
    case GridKind::transform: return "transform";
    case GridKind::d_dx: return "d_dx";
    case GridKind::d_domega: return "d_domega";
  }
  return "unknown";
}

}  // namespace tfphase
