#pragma once

#include <memory>
#include <span>
#include <vector>

#include "tfphase/common.hpp"

namespace tfphase {

// Thin RAII wrapper over an FFTW plan with its own aligned work buffers.
// Plans use FFTW_ESTIMATE so results do not depend on timing measurements.
// A plan is not safe to execute concurrently from several threads.
class FftPlan {
 public:
  enum class Direction { forward, backward };

  FftPlan(std::size_t n, Direction direction);
  ~FftPlan();
  FftPlan(FftPlan&&) noexcept;
  FftPlan& operator=(FftPlan&&) noexcept;
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  std::size_t size() const noexcept;

  // Unnormalized transform: out[k] = sum_j in[j] exp(-+2 pi i jk/n).
  void execute(std::span<const cplx> in, std::span<cplx> out);

  // Direct access to the plan's input buffer, for callers that fill it in
  // place; execute_in_place() then transforms it into output().
  std::span<cplx> input();
  std::span<const cplx> output() const;
  void execute_in_place();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<cplx> fft(std::span<const cplx> in);
// Inverse transform including the 1/n factor.
std::vector<cplx> ifft(std::span<const cplx> in);

}  // namespace tfphase
