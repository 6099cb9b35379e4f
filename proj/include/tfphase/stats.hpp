#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tfphase/signal.hpp"
#include "tfphase/stft.hpp"
#include "tfphase/window.hpp"

namespace tfphase {

// rho(v) = 1 / (2 (1 + v^2)^(3/2)), its CDF (1 + v / sqrt(1 + v^2)) / 2 and
// the inverse CDF (2u - 1) / sqrt(1 - (2u - 1)^2).
double rho_density(double v);
double rho_cdf(double v);
double rho_inverse_cdf(double u);

// n draws from rho(v / scale) / scale by inverse-CDF sampling.
std::vector<double> sample_rho(std::size_t n, std::uint64_t seed, double scale = 1.0);

enum class Centering { none, subtract_2pi_omega, per_bin_median };

struct CollectOptions {
  GridParams grid;
  Convention convention = Convention::V_freq_invariant;
  Centering centering = Centering::per_bin_median;
  double threshold_rel = 1e-10;
  // Frequency band to pool, in Hz. When both are 0 the band is the full axis
  // for circular noise and the interior of the positive half (1.5 / window
  // scale away from 0 and fs/2) for analytic noise.
  double band_min_hz = 0.0;
  double band_max_hz = 0.0;
};

struct SampleSet {
  std::vector<double> samples;
  std::size_t runs = 0;
  std::size_t masked = 0;
  bool gaussian_window = true;  // false: outside the setting the density is stated for
  std::string warning;
};

// Pools valid d/dx arg V values over interior frames of every run.
SampleSet collect_phase_deriv_samples(const std::vector<NoiseSpec>& runs, double sample_rate_hz,
                                      double duration_s, const WindowSpec& spec,
                                      const CollectOptions& options);

enum class HistogramNormalization { counts, density };

struct Histogram {
  std::vector<double> edges;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;    // sum of counts
  std::uint64_t outside = 0;  // samples beyond the edges, not counted
  HistogramNormalization normalization = HistogramNormalization::density;

  // counts / (total * width) for density, raw counts otherwise.
  std::vector<double> heights() const;
};

Histogram make_histogram(const std::vector<double>& samples, std::size_t n_bins, double lo,
                         double hi, HistogramNormalization normalization);

struct DensityFit {
  double scale = 1.0;
  double ks_distance = 1.0;
  std::size_t n_samples = 0;
};

// Maximum-likelihood scale of rho(v / a) / a. Throws for degenerate input.
double fit_rho_scale(const std::vector<double>& samples);

// sup |F_n(v) - rho_cdf(v / scale)|.
double ks_distance_rho(std::vector<double> samples, double scale);

double ks_two_sample(std::vector<double> a, std::vector<double> b);

struct FitResult {
  DensityFit fit;
  Histogram histogram;
};

inline constexpr std::size_t kMinFitSamples = 10000;

// Scale fit, KS distance and a density histogram over +-10 fitted scales.
FitResult fit_and_test(const std::vector<double>& samples, std::size_t n_bins);

std::string to_string(Centering c);
Centering parse_centering(const std::string& name);

}  // namespace tfphase
