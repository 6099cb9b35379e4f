#include "tfphase/window.hpp"

#include <cmath>

#include "tfphase/common.hpp"
#include "tfphase/error.hpp"

namespace tfphase {

void WindowSpec::validate() const {
  switch (family) {
    case WindowFamily::gaussian:
      if (!(sigma_s > 0.0) || !std::isfinite(sigma_s)) {
        throw InvalidArgument("gaussian window needs sigma_s > 0");
      }
      return;
    case WindowFamily::hamming:
    case WindowFamily::rectangular:
      if (!(length_s > 0.0) || !std::isfinite(length_s)) {
        throw InvalidArgument(to_string(family) + " window needs length_s > 0");
      }
      return;
  }
}

double WindowSpec::support_radius_s(double truncation_radius) const {
  if (family == WindowFamily::gaussian) {
    if (!(truncation_radius > 0.0)) throw InvalidArgument("truncation radius must be positive");
    return truncation_radius * sigma_s;
  }
  return 0.5 * length_s;
}

void require_variant_supported(const WindowSpec& spec, WindowVariant variant) {
  if (!spec.differentiable() &&
      (variant == WindowVariant::neg_Dg || variant == WindowVariant::D2g)) {
    throw UnsupportedOperation("variant " + to_string(variant) + " is not defined for the " +
                               to_string(spec.family) +
                               " window (the window is not differentiable)");
  }
}

void window_values(const WindowSpec& spec, std::span<const WindowVariant> variants, double t,
                   std::span<double> out, double truncation_radius) {
  for (const auto v : variants) require_variant_supported(spec, v);
  const double radius = spec.support_radius_s(truncation_radius);
  if (std::abs(t) > radius * (1.0 + 1e-12)) {
    for (std::size_t i = 0; i < variants.size(); ++i) out[i] = 0.0;
    return;
  }

  double g = 0.0;
  double d1 = 0.0;  // g'
  double d2 = 0.0;  // g''
  switch (spec.family) {
    case WindowFamily::gaussian: {
      const double s2 = spec.sigma_s * spec.sigma_s;
      g = std::exp(-kPi * t * t / (2.0 * s2));
      d1 = -(kPi * t / s2) * g;
      d2 = (-kPi / s2 + kPi * kPi * t * t / (s2 * s2)) * g;
      break;
    }
    case WindowFamily::hamming: {
      // Centered: peak at t = 0, one-sided derivatives at the support edge.
      const double k = kTwoPi / spec.length_s;
      g = 0.54 + 0.46 * std::cos(k * t);
      d1 = -0.46 * k * std::sin(k * t);
      d2 = -0.46 * k * k * std::cos(k * t);
      break;
    }
    case WindowFamily::rectangular:
      g = 1.0;
      break;
  }

  for (std::size_t i = 0; i < variants.size(); ++i) {
    switch (variants[i]) {
      case WindowVariant::g: out[i] = g; break;
      case WindowVariant::neg_Dg: out[i] = -d1; break;
      case WindowVariant::Mg: out[i] = t * g; break;
      case WindowVariant::D2g: out[i] = d2; break;
      case WindowVariant::M2g: out[i] = t * t * g; break;
    }
  }
}

double window_value(const WindowSpec& spec, WindowVariant variant, double t,
                    double truncation_radius) {
  double out = 0.0;
  window_values(spec, std::span<const WindowVariant>(&variant, 1), t, std::span<double>(&out, 1),
                truncation_radius);
  return out;
}

std::ptrdiff_t support_radius_samples(const WindowSpec& spec, double sample_rate_hz,
                                      double truncation_radius) {
  spec.validate();
  if (!(sample_rate_hz > 0.0)) throw InvalidArgument("sample rate must be positive");
  // Small slack so that a support edge landing on a sample is included.
  const double r = spec.support_radius_s(truncation_radius) * sample_rate_hz;
  return static_cast<std::ptrdiff_t>(std::floor(r * (1.0 + 1e-12)));
}

SampledWindow sample_window(const WindowSpec& spec, WindowVariant variant, double sample_rate_hz,
                            double truncation_radius) {
  require_variant_supported(spec, variant);
  const std::ptrdiff_t radius = support_radius_samples(spec, sample_rate_hz, truncation_radius);
  SampledWindow w;
  w.center_index = radius;
  w.sample_rate_hz = sample_rate_hz;
  w.variant = variant;
  w.values.resize(static_cast<std::size_t>(2 * radius + 1));
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double t = static_cast<double>(k) / sample_rate_hz;
    w.values[static_cast<std::size_t>(k + radius)] =
        window_value(spec, variant, t, truncation_radius);
  }
  return w;
}

double window_scale_s(const WindowSpec& spec) {
  spec.validate();
  return spec.family == WindowFamily::gaussian ? spec.sigma_s : spec.length_s / 12.0;
}

std::string to_string(WindowFamily family) {
  switch (family) {
    case WindowFamily::gaussian: return "gaussian";
    case WindowFamily::hamming: return "hamming";
    case WindowFamily::rectangular: return "rectangular";
  }
  return "unknown";
}

std::string to_string(WindowVariant variant) {
  switch (variant) {
    case WindowVariant::g: return "g";
    case WindowVariant::neg_Dg: return "neg_Dg";
    case WindowVariant::Mg: return "Mg";
    case WindowVariant::D2g: return "D2g";
    case WindowVariant::M2g: return "M2g";
  }
  return "unknown";
}

WindowFamily parse_window_family(const std::string& name) {
  if (name == "gaussian" || name == "gauss") return WindowFamily::gaussian;
  if (name == "hamming") return WindowFamily::hamming;
  if (name == "rectangular" || name == "rect") return WindowFamily::rectangular;
  throw InvalidArgument("unknown window family '" + name + "'");
}

WindowVariant parse_window_variant(const std::string& name) {
  if (name == "g") return WindowVariant::g;
  if (name == "neg_Dg") return WindowVariant::neg_Dg;
  if (name == "Mg") return WindowVariant::Mg;
  if (name == "D2g") return WindowVariant::D2g;
  if (name == "M2g") return WindowVariant::M2g;
  throw InvalidArgument("unknown window variant '" + name + "'");
}

}  // namespace tfphase
