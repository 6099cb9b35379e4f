#include "tfphase/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>

#include "tfphase/error.hpp"

namespace tfphase {

struct FftPlan::Impl {
  std::size_t n = 0;
  fftw_complex* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;

  ~Impl() {
    if (plan) fftw_destroy_plan(plan);
    if (in) fftw_free(in);
    if (out) fftw_free(out);
  }
};

FftPlan::FftPlan(std::size_t n, Direction direction) : impl_(std::make_unique<Impl>()) {
  if (n == 0) throw InvalidArgument("fft size must be positive");
  impl_->n = n;
  impl_->in = fftw_alloc_complex(n);
  impl_->out = fftw_alloc_complex(n);
  if (!impl_->in || !impl_->out) throw std::bad_alloc();
  const int sign = direction == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD;
  impl_->plan = fftw_plan_dft_1d(static_cast<int>(n), impl_->in, impl_->out, sign, FFTW_ESTIMATE);
  if (!impl_->plan) throw NumericalError("fftw failed to create a plan");
}

FftPlan::~FftPlan() = default;
FftPlan::FftPlan(FftPlan&&) noexcept = default;
FftPlan& FftPlan::operator=(FftPlan&&) noexcept = default;

std::size_t FftPlan::size() const noexcept { return impl_->n; }

std::span<cplx> FftPlan::input() {
  return {reinterpret_cast<cplx*>(impl_->in), impl_->n};
}

std::span<const cplx> FftPlan::output() const {
  return {reinterpret_cast<const cplx*>(impl_->out), impl_->n};
}

void FftPlan::execute_in_place() { fftw_execute(impl_->plan); }

void FftPlan::execute(std::span<const cplx> in, std::span<cplx> out) {
  if (in.size() != impl_->n || out.size() != impl_->n) {
    throw InvalidArgument("fft buffer size does not match the plan");
  }
  std::memcpy(impl_->in, in.data(), impl_->n * sizeof(fftw_complex));
  fftw_execute(impl_->plan);
  const auto res = output();
  std::copy(res.begin(), res.end(), out.begin());
}

std::vector<cplx> fft(std::span<const cplx> in) {
  FftPlan plan(in.size(), FftPlan::Direction::forward);
  std::vector<cplx> out(in.size());
  plan.execute(in, out);
  return out;
}

std::vector<cplx> ifft(std::span<const cplx> in) {
  FftPlan plan(in.size(), FftPlan::Direction::backward);
  std::vector<cplx> out(in.size());
  plan.execute(in, out);
  const double scale = 1.0 / static_cast<double>(in.size());
  for (auto& v : out) v *= scale;
  return out;
}

}  // namespace tfphase
