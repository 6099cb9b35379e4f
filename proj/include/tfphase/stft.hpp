#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tfphase/common.hpp"
#include "tfphase/signal.hpp"
#include "tfphase/window.hpp"

namespace tfphase {

// What a grid holds: the transform itself or one of its partial derivatives.
enum class GridKind { transform, d_dx, d_domega };

struct GridParams {
  std::size_t hop_samples = 1;
  std::size_t fft_size = 0;  // 0: next power of two >= 4x the window support
  double truncation_radius = kDefaultTruncationRadius;
};

std::size_t default_fft_size(const WindowSpec& spec, double sample_rate_hz,
                             double truncation_radius = kDefaultTruncationRadius);

// Complex transform values on a lattice. coeffs(k, m) is the value at
// (time_axis_s[m], freq_axis_hz[k]). Values approximate the continuous
// integrals (the Riemann sum carries a 1/fs factor).
struct StftGrid {
  Grid2D<cplx> coeffs;
  std::vector<double> time_axis_s;
  std::vector<double> freq_axis_hz;
  Convention convention = Convention::V_freq_invariant;
  WindowSpec window;
  WindowVariant variant_used = WindowVariant::g;
  GridKind kind = GridKind::transform;
  // Frames whose window support leaves the signal (implicit zero padding).
  std::vector<std::uint8_t> boundary_frame;
  double sample_rate_hz = 1.0;
  std::size_t hop_samples = 1;
  std::size_t fft_size = 0;
  double truncation_radius = kDefaultTruncationRadius;

  std::size_t bins() const noexcept { return coeffs.rows(); }
  std::size_t frames() const noexcept { return coeffs.cols(); }
  double time_step_s() const { return static_cast<double>(hop_samples) / sample_rate_hz; }
  double freq_step_hz() const { return sample_rate_hz / static_cast<double>(fft_size); }
  double max_abs() const;
};

// Throws InvalidArgument when the grids do not share axes and convention.
void require_same_axes(const StftGrid& a, const StftGrid& b);

StftGrid stft_grid(const SignalBuffer& f, const WindowSpec& spec, WindowVariant variant,
                   const GridParams& params, Convention convention);

// Re-express a grid in the other convention (multiplies by exp(+-2 pi i w x)).
StftGrid convert_convention(const StftGrid& grid, Convention target);

// Phase factor exp(2 pi i w_k x_m) relating W to V at a lattice node.
cplx convention_phasor(const StftGrid& grid, std::size_t k, std::size_t m);

// Direct Riemann-sum quadrature at a continuous point.
cplx stft_point(const SignalBuffer& f, const WindowSpec& spec, WindowVariant variant,
                const TfPoint& p, Convention convention,
                double truncation_radius = kDefaultTruncationRadius);

// Several window variants at one point in a single pass over the signal.
// Always V convention.
std::vector<cplx> stft_point_variants(const SignalBuffer& f, const WindowSpec& spec,
                                      std::span<const WindowVariant> variants, const TfPoint& p,
                                      double truncation_radius = kDefaultTruncationRadius);

// Point values of V and its first partial derivatives (V convention):
// vx = V(f, -Dg), vomega = -2 pi i (x V + V(f, Mg)).
struct PointDerivatives {
  cplx v;
  cplx vx;
  cplx vomega;
};
PointDerivatives stft_point_derivatives(const SignalBuffer& f, const WindowSpec& spec,
                                        const TfPoint& p,
                                        double truncation_radius = kDefaultTruncationRadius);

// The time span where stft_point is defined: the signal span padded by the
// window radius.
struct TimeSpan {
  double begin_s;
  double end_s;
};
TimeSpan supported_span(const SignalBuffer& f, const WindowSpec& spec,
                        double truncation_radius = kDefaultTruncationRadius);

struct DerivativeStfts {
  StftGrid v;
  StftGrid vx;
  StftGrid vomega;
};

// The transform and its two partial derivatives on a common lattice, in the
// requested convention. For W these are the derivatives of W itself,
// W_x = exp(2 pi i w x)(V_x + 2 pi i w V) and W_w = exp(2 pi i w x)(V_w + 2 pi i x V).
DerivativeStfts derivative_stfts(const SignalBuffer& f, const WindowSpec& spec,
                                 const GridParams& params,
                                 Convention convention = Convention::V_freq_invariant);

std::string to_string(Convention c);
Convention parse_convention(const std::string& name);
std::string to_string(GridKind kind);

}  // namespace tfphase
