#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace tfphase {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// exp(2*pi*i*cycles), with the argument reduced modulo one turn before the
// trig calls. Quarter turns are exact (cis_cycles(0.25) == i).
inline cplx cis_cycles(double cycles) {
  double r = cycles - std::nearbyint(cycles);  // [-0.5, 0.5]
  const double q = std::nearbyint(4.0 * r);    // quadrant in {-2..2}
  r -= 0.25 * q;                               // [-0.125, 0.125]
  const double c = std::cos(kTwoPi * r);
  const double s = std::sin(kTwoPi * r);
  switch (static_cast<int>(q)) {
    case 1: return {-s, c};
    case -1: return {s, -c};
    case 2:
    case -2: return {-c, -s};
    default: return {c, s};
  }
}

// V: frequency-invariant, V(x, w) = int f(t) conj(g(t - x)) exp(-2 pi i w t) dt.
// W: time-invariant, W = exp(2 pi i w x) V.
enum class Convention { V_freq_invariant, W_time_invariant };

// A point of the time-frequency plane in physical units.
struct TfPoint {
  double x_s = 0.0;
  double omega_hz = 0.0;
};

// Dense row-major matrix. Rows are frequency bins, columns are time frames
// wherever it holds transform data.
template <typename T>
class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  T* row(std::size_t r) noexcept { return data_.data() + r * cols_; }
  const T* row(std::size_t r) const noexcept { return data_.data() + r * cols_; }

  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

}  // namespace tfphase
