#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tfphase {

enum class WindowFamily { gaussian, hamming, rectangular };

// Window variants: the window g and the operator images used by the
// derivative transforms. neg_Dg = -g', Mg = t g, D2g = g'', M2g = t^2 g.
enum class WindowVariant { g, neg_Dg, Mg, D2g, M2g };

inline constexpr double kDefaultTruncationRadius = 6.0;

struct WindowSpec {
  WindowFamily family = WindowFamily::gaussian;
  double sigma_s = 0.0;   // gaussian: g(t) = exp(-pi t^2 / (2 sigma^2))
  double length_s = 0.0;  // hamming/rectangular: support [-L/2, L/2]

  static WindowSpec gaussian(double sigma_s) { return {WindowFamily::gaussian, sigma_s, 0.0}; }
  static WindowSpec hamming(double length_s) { return {WindowFamily::hamming, 0.0, length_s}; }
  static WindowSpec rectangular(double length_s) {
    return {WindowFamily::rectangular, 0.0, length_s};
  }

  void validate() const;

  // Half-width of the (truncated) support in seconds. truncation_radius is in
  // units of sigma and only matters for the Gaussian.
  double support_radius_s(double truncation_radius = kDefaultTruncationRadius) const;

  // Whether the family has the analytic derivative variants (neg_Dg, D2g).
  bool differentiable() const noexcept { return family != WindowFamily::rectangular; }
};

// Analytic value of a window variant at time offset t (seconds). Zero outside
// the support. Throws UnsupportedOperation for derivatives of the rectangle.
double window_value(const WindowSpec& spec, WindowVariant variant, double t,
                    double truncation_radius = kDefaultTruncationRadius);

// Several variants at once; out.size() must be >= variants.size().
void window_values(const WindowSpec& spec, std::span<const WindowVariant> variants, double t,
                   std::span<double> out, double truncation_radius = kDefaultTruncationRadius);

void require_variant_supported(const WindowSpec& spec, WindowVariant variant);

// Real-valued samples of a window variant on t_j = (j - center_index) / fs.
// All supported families are real, so the values are stored as doubles.
struct SampledWindow {
  std::vector<double> values;
  std::ptrdiff_t center_index = 0;
  double sample_rate_hz = 1.0;
  WindowVariant variant = WindowVariant::g;

  // Support runs over offsets -radius()..radius() in samples.
  std::ptrdiff_t radius() const noexcept { return center_index; }
  double time_at(std::size_t j) const {
    return static_cast<double>(static_cast<std::ptrdiff_t>(j) - center_index) / sample_rate_hz;
  }
  double at_offset(std::ptrdiff_t k) const {
    return values[static_cast<std::size_t>(k + center_index)];
  }
};

// Support half-width in samples for the given rate.
std::ptrdiff_t support_radius_samples(const WindowSpec& spec, double sample_rate_hz,
                                      double truncation_radius = kDefaultTruncationRadius);

SampledWindow sample_window(const WindowSpec& spec, WindowVariant variant, double sample_rate_hz,
                            double truncation_radius = kDefaultTruncationRadius);

// Time scale for default step sizes: sigma for the Gaussian, L/12 for the
// others (comparable spread at the default truncation).
double window_scale_s(const WindowSpec& spec);

std::string to_string(WindowFamily family);
std::string to_string(WindowVariant variant);
WindowFamily parse_window_family(const std::string& name);
WindowVariant parse_window_variant(const std::string& name);

}  // namespace tfphase
