#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tfphase/common.hpp"
#include "tfphase/error.hpp"
#include "tfphase/signal.hpp"
#include "tfphase/stft.hpp"
#include "tfphase/window.hpp"

namespace tfphase {

// Partial derivatives of (U, W) = (Re V, Im V) with respect to (x, w), in
// seconds and hertz.
struct Jacobian {
  double ux = 0.0;
  double uomega = 0.0;
  double wx = 0.0;
  double womega = 0.0;

  double det() const { return ux * womega - uomega * wx; }
  // |det| / (2 |V_x| |V_w|): the Frobenius degeneracy ratio after the
  // frequency axis is rescaled to balance the two columns. Lies in [0, 1/2].
  double balanced_degeneracy() const;
};

enum class DetSign { negative, positive };

inline constexpr double kDegeneracyFloor = 1e-6;

class DegenerateZero : public NumericalError {
 public:
  DegenerateZero(const std::string& what, TfPoint at) : NumericalError(what), at_(at) {}
  TfPoint at() const noexcept { return at_; }

 private:
  TfPoint at_;
};

class NonConvergence : public NumericalError {
 public:
  NonConvergence(const std::string& what, TfPoint best, double best_residual)
      : NumericalError(what), best_(best), best_residual_(best_residual) {}
  TfPoint best() const noexcept { return best_; }
  double best_residual() const noexcept { return best_residual_; }

 private:
  TfPoint best_;
  double best_residual_;
};

// Grid nodes that are strict minima of |V| over their 8 neighbours with
// |V| < rel_floor max|V|. Edge rows/columns and boundary frames are skipped,
// as are minima whose (2 r + 1)^2 neighbourhood never rises above
// contrast_rel max|V| (rounding-noise minima in empty bands).
struct DetectOptions {
  double rel_floor = 0.1;
  double contrast_rel = 1e-8;
  std::size_t contrast_radius = 2;
};
std::vector<TfPoint> detect_zero_candidates(const StftGrid& v, const DetectOptions& options = {});

struct RefineOptions {
  double tol = 1e-12;  // stop when |V| < tol * reference_modulus
  int max_iter = 50;
  double reference_modulus = 0.0;  // usually max|V| of the grid; must be > 0
  double degeneracy_floor = kDegeneracyFloor;
  double truncation_radius = kDefaultTruncationRadius;
};

struct Refinement {
  TfPoint location;
  double residual_modulus = 0.0;  // |V| at location, absolute
  Jacobian jacobian;
  int iterations = 0;
  std::vector<double> residual_history;  // |V| / reference, starting at the seed
};

// Two-dimensional Newton iteration on (U, W) = 0 with the Jacobian from the
// derivative transforms. Throws DegenerateZero or NonConvergence.
Refinement refine_zero(const SignalBuffer& f, const WindowSpec& spec, TfPoint seed,
                       const RefineOptions& options);

Jacobian jacobian_at(const SignalBuffer& f, const WindowSpec& spec, TfPoint p,
                     double truncation_radius = kDefaultTruncationRadius);

// Central-difference Jacobian of (U, W) from transform values alone.
Jacobian jacobian_finite_difference(const SignalBuffer& f, const WindowSpec& spec, TfPoint p,
                                    double hx_s, double homega_hz,
                                    double truncation_radius = kDefaultTruncationRadius);

// Phase derivative sampled on both sides of a zero along one axis at
// eps_j = eps0 2^-j. "below"/"above" are w0 -+ eps for profiles along the
// frequency axis and x0 -+ eps (left/right) for profiles along time. Signs are
// +1 or -1 (0 when a side is empty or changes sign). Derivatives along x are
// of arg V, derivatives along w of arg W (no offset from the time origin).
struct DivergenceFit {
  std::vector<double> epsilons;
  std::vector<double> values_below;  // NaN where dropped
  std::vector<double> values_above;
  double loglog_slope_below = 0.0;
  double loglog_slope_above = 0.0;
  int sign_below = 0;
  int sign_above = 0;
};

// Finite limit of a phase derivative along a path through a zero, from the
// closed formula and from samples at eps_j on both sides.
struct FiniteLimit {
  double formula = 0.0;  // arg V for c, arg W for c'
  std::vector<double> epsilons;
  std::vector<double> values_below;
  std::vector<double> values_above;
  std::vector<double> symmetric;  // (below + above) / 2
  bool bounded = false;
  double last_step_change = 0.0;  // |symmetric[n-1] - symmetric[n-2]|
};

struct ProfileOptions {
  double eps0 = 0.0;  // Hz along frequency, seconds along time
  int n_steps = 8;
  double threshold_rel = 1e-10;
  double reference_modulus = 0.0;
  double truncation_radius = kDefaultTruncationRadius;
};

// d/dx arg V at (x0, w0 -+ eps).
DivergenceFit vertical_profile(const SignalBuffer& f, const WindowSpec& spec, TfPoint zero,
                               const ProfileOptions& options);

// c = Im(conj(V_x) V_xx) / (2 |V_x|^2) with V_xx = V(f, D^2 g), and d/dx arg V
// at (x0 -+ eps, w0). Needs the Gaussian window.
FiniteLimit horizontal_limit(const SignalBuffer& f, const WindowSpec& spec, TfPoint zero,
                             const ProfileOptions& options);

// d/dw arg W at (x0 -+ eps, w0), diverging.
DivergenceFit frequency_profile_along_x(const SignalBuffer& f, const WindowSpec& spec,
                                        TfPoint zero, const ProfileOptions& options);

// c' = Im(conj(V_w) V_ww) / (2 |V_w|^2) + 2 pi x0 and d/dw arg W at
// (x0, w0 -+ eps), with V_ww = -2 pi i x V_w - 4 pi^2 (x V(f, Mg) + V(f, M^2 g)).
FiniteLimit frequency_limit_along_omega(const SignalBuffer& f, const WindowSpec& spec,
                                        TfPoint zero, const ProfileOptions& options);

// Expected (sign_below, sign_above) for d/dx arg V along frequency.
std::pair<int, int> expected_vertical_signs(DetSign s);
// Expected (sign_left, sign_right) for d/dw arg W along time.
std::pair<int, int> expected_horizontal_signs(DetSign s);

struct ZeroReport {
  TfPoint location;
  double residual_modulus = 0.0;
  Jacobian jacobian;
  DetSign det_sign = DetSign::negative;
  double degeneracy = 0.0;
  bool classified = false;
  bool interior = false;
  int iterations = 0;
  std::vector<double> residual_history;
  std::optional<DivergenceFit> vertical_profile;
  std::optional<DivergenceFit> omega_profile;  // d/dw along time
  std::optional<FiniteLimit> horizontal;       // c
  std::optional<FiniteLimit> vertical_limit;   // c'
  bool pattern_pass = false;
  std::string note;
};

struct AnalyzeOptions {
  DetectOptions detect;
  RefineOptions refine;
  int n_steps = 8;
  double eps0_omega_hz = 0.0;  // 0: two frequency bins, capped at 1/(8 s)
  double eps0_x_s = 0.0;       // 0: two hops, capped at s/8
  double threshold_rel = 1e-10;
  double max_jump_cells = 4.0;  // refined zeros further than this from the seed are dropped
  bool profiles = true;
};

struct ZeroSummary {
  std::size_t candidates = 0;
  std::size_t refined = 0;
  std::size_t failed = 0;
  std::size_t classified = 0;
  std::size_t classified_interior = 0;
  std::size_t pattern_pass = 0;
  double pass_rate = 0.0;  // over classified interior zeros; 1 when there are none
  double mean_slope_below = 0.0;
  double mean_slope_above = 0.0;
};

// Detect, refine, deduplicate, classify and (optionally) profile the zeros of
// the grid's transform. The grid must be the transform of f with spec.
std::vector<ZeroReport> analyze_zeros(const SignalBuffer& f, const StftGrid& grid,
                                      const AnalyzeOptions& options, ZeroSummary* summary = nullptr);

// Refine one seed and build its report. Throws like refine_zero.
ZeroReport analyze_zero(const SignalBuffer& f, const WindowSpec& spec, TfPoint seed,
                        const AnalyzeOptions& options, double eps0_omega_hz, double eps0_x_s);

std::string to_string(DetSign s);

}  // namespace tfphase
