#pragma once

#include <cstdint>
#include <vector>

#include "tfphase/common.hpp"
#include "tfphase/stft.hpp"

namespace tfphase {

enum class PhaseDirection { d_dx, d_domega };

inline constexpr double kDefaultMaskThreshold = 1e-10;

// Phase derivative of a transform grid. d_dx values are in rad/s, d_domega
// values in rad/Hz. mask(k, m) == 1 marks a valid cell.
struct PhaseGradGrid {
  Grid2D<double> values;
  Grid2D<std::uint8_t> mask;
  double threshold_rel = kDefaultMaskThreshold;
  PhaseDirection direction = PhaseDirection::d_dx;
  Convention convention = Convention::V_freq_invariant;
  std::vector<double> time_axis_s;
  std::vector<double> freq_axis_hz;

  std::size_t bins() const noexcept { return values.rows(); }
  std::size_t frames() const noexcept { return values.cols(); }
  bool valid(std::size_t k, std::size_t m) const { return mask(k, m) != 0; }
  std::size_t valid_count() const;
};

// Principal argument in (-pi, pi]. Throws DomainError for z == 0.
double arg_branch(cplx z);

// Im(aux conj(v)) / |v|^2 with aux the partial derivative grid for the
// direction (from derivative_stfts). Cells with |v| < threshold_rel max|v|
// are masked.
PhaseGradGrid phase_deriv_ratio(const StftGrid& v, const StftGrid& aux, PhaseDirection direction,
                                double threshold_rel = kDefaultMaskThreshold);

// Same quantity from real and imaginary parts: (U W_d - W U_d) / (U^2 + W^2).
PhaseGradGrid phase_deriv_cartesian(const StftGrid& v, const StftGrid& aux,
                                    PhaseDirection direction,
                                    double threshold_rel = kDefaultMaskThreshold);

// Finite differences of the unwrapped argument along rows (d_dx) or columns
// (d_domega): central differences inside the line, one-sided at its ends. A
// step between neighbours is unusable when either cell is below the modulus
// threshold or when the wrapped phase increment is within 1e-6 of +-pi.
// Cells whose differencing error, estimated from the next-order difference of
// the complex increments of log V, exceeds max_error_fraction of the lattice Nyquist rate
// (pi / spacing) are masked, as are interior cells lacking the two usable
// steps on each side that the estimate needs.
struct UnwrapOptions {
  double threshold_rel = kDefaultMaskThreshold;
  double max_error_fraction = 0.0025;
};
PhaseGradGrid phase_deriv_unwrap(const StftGrid& v, PhaseDirection direction,
                                 const UnwrapOptions& options = {});

// Ratio formula at a single continuous point (V convention); NaN when |v| is 0.
double phase_deriv_at(cplx v, cplx aux);

std::string to_string(PhaseDirection d);
PhaseDirection parse_phase_direction(const std::string& name);

}  // namespace tfphase
