#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tfphase/common.hpp"

namespace tfphase {

// Uniformly sampled complex signal. Sample n sits at
// t_n = start_time_s + n / sample_rate_hz; the signal is zero elsewhere.
struct SignalBuffer {
  std::vector<cplx> samples;
  double sample_rate_hz = 1.0;
  double start_time_s = 0.0;

  std::size_t size() const noexcept { return samples.size(); }
  double time_at(std::ptrdiff_t n) const {
    return start_time_s + static_cast<double>(n) / sample_rate_hz;
  }
  double end_time_s() const { return time_at(static_cast<std::ptrdiff_t>(samples.size()) - 1); }

  // Throws InvalidArgument unless sample_rate_hz > 0 and samples is non-empty.
  void validate() const;
};

enum class NoiseKind { circular_complex, analytic };

struct NoiseSpec {
  double variance = 1.0;  // sigma^2; Re and Im each carry variance/2
  NoiseKind kind = NoiseKind::circular_complex;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class SignalFormat { wav_pcm16_mono, csv_complex };

SignalBuffer make_two_tone(double f1_hz, double f2_hz, double sample_rate_hz, double duration_s);
SignalBuffer make_pure_tone(double f0_hz, double sample_rate_hz, double duration_s);
SignalBuffer make_noise(const NoiseSpec& spec, double sample_rate_hz, double duration_s);

// exp(2*pi*i*f*t_n) for n = 0..count-1 at the given rate. Shared by the tone
// generators so that a two-tone buffer is exactly the sum of two pure tones.
std::vector<cplx> tone_samples(double f_hz, double sample_rate_hz, std::size_t count);

// csv_complex needs the caller's sample rate; wav takes it from the header
// (the argument is ignored).
SignalBuffer read_signal(const std::filesystem::path& path, SignalFormat format,
                         double sample_rate_hz = 0.0);

void write_signal_csv(const std::filesystem::path& path, const SignalBuffer& signal,
                      bool header = true);
// Real part only, clipped to [-1, 1) and quantized to 16 bits.
void write_signal_wav(const std::filesystem::path& path, const SignalBuffer& signal);

}  // namespace tfphase
