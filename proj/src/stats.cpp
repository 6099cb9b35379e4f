#include "tfphase/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "tfphase/error.hpp"
#include "tfphase/phasegrad.hpp"

namespace tfphase {

double rho_density(double v) {
  const double q = 1.0 + v * v;
  return 0.5 / (q * std::sqrt(q));
}

double rho_cdf(double v) {
  if (std::isinf(v)) return v > 0.0 ? 1.0 : 0.0;
  const double h = std::hypot(1.0, v);
  // The lower tail as 1 / (2 h (h + |v|)) avoids cancellation.
  return v >= 0.0 ? 0.5 * (1.0 + v / h) : 0.5 / (h * (h - v));
}

double rho_inverse_cdf(double u) {
  if (!(u > 0.0 && u < 1.0)) throw InvalidArgument("inverse CDF needs 0 < u < 1");
  const double y = 2.0 * u - 1.0;
  // 1 - y^2 = 4 u (1 - u), which keeps precision near the tails.
  return y / std::sqrt(4.0 * u * (1.0 - u));
}

std::vector<double> sample_rho(std::size_t n, std::uint64_t seed, double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("scale must be > 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) {
    double u = 0.0;
    do {
      u = uni(rng);
    } while (u == 0.0);
    v = scale * rho_inverse_cdf(u);
  }
  return out;
}

namespace {

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

}  // namespace

SampleSet collect_phase_deriv_samples(const std::vector<NoiseSpec>& runs, double sample_rate_hz,
                                      double duration_s, const WindowSpec& spec,
                                      const CollectOptions& options) {
  if (runs.empty()) throw InvalidArgument("need at least one noise run");
  spec.validate();
  if (!spec.differentiable()) {
    throw UnsupportedOperation("phase derivative samples need a differentiable window");
  }
  SampleSet set;
  set.gaussian_window = spec.family == WindowFamily::gaussian;
  if (!set.gaussian_window) {
    set.warning = "the reference density is stated for the gaussian window only";
  }

  for (const auto& run : runs) {
    const SignalBuffer f = make_noise(run, sample_rate_hz, duration_s);
    const DerivativeStfts d = derivative_stfts(f, spec, options.grid, options.convention);
    const PhaseGradGrid pg =
        phase_deriv_ratio(d.v, d.vx, PhaseDirection::d_dx, options.threshold_rel);

    double lo = options.band_min_hz;
    double hi = options.band_max_hz;
    if (lo == 0.0 && hi == 0.0) {
      if (run.kind == NoiseKind::analytic) {
        const double margin = 1.5 / window_scale_s(spec);
        lo = margin;
        hi = 0.5 * sample_rate_hz - margin;
      } else {
        hi = sample_rate_hz;
      }
    }

    std::vector<double> row;
    for (std::size_t k = 0; k < pg.bins(); ++k) {
      const double w = pg.freq_axis_hz[k];
      if (w < lo || w > hi) continue;
      row.clear();
      for (std::size_t m = 0; m < pg.frames(); ++m) {
        if (d.v.boundary_frame[m]) continue;
        if (!pg.valid(k, m)) {
          ++set.masked;
          continue;
        }
        row.push_back(pg.values(k, m));
      }
      if (row.empty()) continue;
      double shift = 0.0;
      switch (options.centering) {
        case Centering::none: break;
        case Centering::subtract_2pi_omega: shift = kTwoPi * w; break;
        case Centering::per_bin_median: shift = median_of(row); break;
      }
      for (const double v : row) set.samples.push_back(v - shift);
    }
    ++set.runs;
  }
  return set;
}

std::vector<double> Histogram::heights() const {
  std::vector<double> h(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto c = static_cast<double>(counts[i]);
    if (normalization == HistogramNormalization::counts) {
      h[i] = c;
    } else {
      h[i] = total == 0 ? 0.0 : c / (static_cast<double>(total) * (edges[i + 1] - edges[i]));
    }
  }
  return h;
}

Histogram make_histogram(const std::vector<double>& samples, std::size_t n_bins, double lo,
                         double hi, HistogramNormalization normalization) {
  if (n_bins == 0) throw InvalidArgument("histogram needs at least one bin");
  if (!(hi > lo)) throw InvalidArgument("histogram range is empty");
  Histogram h;
  h.normalization = normalization;
  h.edges.resize(n_bins + 1);
  for (std::size_t i = 0; i <= n_bins; ++i) {
    h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_bins);
  }
  h.edges.back() = hi;
  h.counts.assign(n_bins, 0);
  const double width = (hi - lo) / static_cast<double>(n_bins);
  for (const double v : samples) {
    if (!(v >= lo && v <= hi)) {
      ++h.outside;
      continue;
    }
    auto i = static_cast<std::size_t>((v - lo) / width);
    if (i >= n_bins) i = n_bins - 1;
    // Guard the floor against rounding at the edges.
    while (i > 0 && v < h.edges[i]) --i;
    while (i + 1 < n_bins && v >= h.edges[i + 1]) ++i;
    ++h.counts[i];
    ++h.total;
  }
  return h;
}

double fit_rho_scale(const std::vector<double>& samples) {
  if (samples.size() < 2) throw InvalidArgument("scale fit needs at least two samples");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  if (*mn == *mx) throw NumericalError("degenerate samples: all values are equal");
  for (const double v : samples) {
    if (!std::isfinite(v)) throw InvalidArgument("samples must be finite");
  }

  // Score equation sum v^2 / (a^2 + v^2) = n / 3; the left side falls from
  // (number of nonzero samples) to 0 as a grows.
  const double target = static_cast<double>(samples.size()) / 3.0;
  auto lhs = [&](double a) {
    const double a2 = a * a;
    double s = 0.0;
    for (const double v : samples) s += v * v / (a2 + v * v);
    return s;
  };
  double abs_max = 0.0;
  double abs_min = std::numeric_limits<double>::infinity();
  for (const double v : samples) {
    const double a = std::abs(v);
    abs_max = std::max(abs_max, a);
    if (a > 0.0) abs_min = std::min(abs_min, a);
  }
  double lo = std::log(abs_min) - 10.0;
  double hi = std::log(abs_max) + 10.0;
  if (!(lhs(std::exp(lo)) > target)) {
    throw NumericalError("degenerate samples: too many exact zeros for a scale fit");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (lhs(std::exp(mid)) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

double ks_distance_rho(std::vector<double> samples, double scale) {
  if (samples.empty()) throw InvalidArgument("KS distance needs samples");
  if (!(scale > 0.0)) throw InvalidArgument("scale must be > 0");
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = rho_cdf(samples[i] / scale);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("KS distance needs samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

FitResult fit_and_test(const std::vector<double>& samples, std::size_t n_bins) {
  if (samples.size() < kMinFitSamples) {
    throw InvalidArgument("fit needs at least " + std::to_string(kMinFitSamples) + " samples, got " +
                          std::to_string(samples.size()));
  }
  FitResult r;
  r.fit.scale = fit_rho_scale(samples);
  r.fit.ks_distance = ks_distance_rho(samples, r.fit.scale);
  r.fit.n_samples = samples.size();
  r.histogram = make_histogram(samples, n_bins, -10.0 * r.fit.scale, 10.0 * r.fit.scale,
                               HistogramNormalization::density);
  return r;
}

std::string to_string(Centering c) {
  switch (c) {
    case Centering::none: return "none";
    case Centering::subtract_2pi_omega: return "subtract_2pi_omega";
    case Centering::per_bin_median: return "per_bin_median";
  }
  return "unknown";
}

Centering parse_centering(const std::string& name) {
  if (name == "none") return Centering::none;
  if (name == "subtract_2pi_omega") return Centering::subtract_2pi_omega;
  if (name == "per_bin_median") return Centering::per_bin_median;
  throw InvalidArgument("unknown centering '" + name + "'");
}

}  // namespace tfphase
