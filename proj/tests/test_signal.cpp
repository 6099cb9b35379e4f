#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <vector>

#include "test_util.hpp"
#include "tfphase/error.hpp"
#include "tfphase/fft.hpp"
#include "tfphase/signal.hpp"

using namespace tfphase;

namespace {

void write_wav_bytes(const std::filesystem::path& p, std::uint16_t channels,
                     const std::vector<std::int16_t>& samples) {
  std::ofstream out(p, std::ios::binary);
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  auto u16 = [&](std::uint16_t v) {
    out.put(static_cast<char>(v & 0xff));
    out.put(static_cast<char>(v >> 8));
  };
  const auto data_bytes = static_cast<std::uint32_t>(2 * samples.size());
  out.write("RIFF", 4);
  u32(36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  u32(16);
  u16(1);
  u16(channels);
  u32(8000);
  u32(8000 * 2 * channels);
  u16(static_cast<std::uint16_t>(2 * channels));
  u16(16);
  out.write("data", 4);
  u32(data_bytes);
  for (const auto s : samples) u16(static_cast<std::uint16_t>(s));
}

}  // namespace

TEST_CASE("two-tone buffer length and first sample") {
  const SignalBuffer s = make_two_tone(500, 1500, 8000, 0.1);
  CHECK(s.size() == 800);
  CHECK(s.samples[0] == cplx(2.0, 0.0));
  CHECK(s.sample_rate_hz == 8000.0);
}

TEST_CASE("two-tone with opposite frequencies is real") {
  const SignalBuffer s = make_two_tone(-300, 300, 4000, 0.05);
  for (std::size_t n = 0; n < s.size(); ++n) {
    const double t = s.time_at(static_cast<std::ptrdiff_t>(n));
    CHECK(std::abs(s.samples[n].imag()) < 1e-14);
    CHECK(s.samples[n].real() == doctest::Approx(2.0 * std::cos(2.0 * M_PI * 300 * t)).epsilon(1e-12));
  }
}

TEST_CASE("two-tone matches a direct evaluation at random indices") {
  const SignalBuffer s = make_two_tone(100, 300, 2000, 0.5);
  std::mt19937 rng(7);
  std::uniform_int_distribution<std::size_t> pick(0, s.size() - 1);
  for (int i = 0; i < 10; ++i) {
    const std::size_t n = pick(rng);
    const double t = static_cast<double>(n) / 2000.0;
    const cplx ref = std::exp(cplx(0, 2 * M_PI * 100 * t)) + std::exp(cplx(0, 2 * M_PI * 300 * t));
    CHECK(std::abs(s.samples[n] - ref) < 1e-12);
  }
}

TEST_CASE("two-tone is the exact sum of two pure tones") {
  const SignalBuffer a = make_pure_tone(437, 8000, 0.2);
  const SignalBuffer b = make_pure_tone(1291, 8000, 0.2);
  const SignalBuffer s = make_two_tone(437, 1291, 8000, 0.2);
  for (std::size_t n = 0; n < s.size(); ++n) CHECK(s.samples[n] == a.samples[n] + b.samples[n]);
}

TEST_CASE("generator preconditions") {
  CHECK_THROWS_AS(make_two_tone(500, 500, 8000, 0.1), InvalidArgument);
  CHECK_THROWS_AS(make_two_tone(500, 4000, 8000, 0.1), InvalidArgument);
  CHECK_THROWS_AS(make_pure_tone(-4000, 8000, 0.1), InvalidArgument);
  CHECK_THROWS_AS(make_pure_tone(100, 8000, 0.0), InvalidArgument);
  CHECK_THROWS_AS(make_pure_tone(100, -1, 0.1), InvalidArgument);
  NoiseSpec bad;
  bad.variance = 0.0;
  CHECK_THROWS_AS(make_noise(bad, 8000, 0.1), InvalidArgument);
}

TEST_CASE("pure tone values") {
  const SignalBuffer dc = make_pure_tone(0, 8000, 0.01);
  for (const auto& v : dc.samples) CHECK(v == cplx(1.0, 0.0));
  const SignalBuffer q = make_pure_tone(1000, 8000, 0.01);
  CHECK(std::abs(q.samples[2] - cplx(0, 1)) < 1e-15);

  const SignalBuffer a = make_pure_tone(440, 44100, 0.1);
  for (std::size_t n : {0u, 17u, 1234u, 4409u}) {
    const double t = static_cast<double>(n) / 44100.0;
    CHECK(std::abs(a.samples[n] - std::exp(cplx(0, 2 * M_PI * 440 * t))) < 1e-12);
  }
}

TEST_CASE("circular noise moments") {
  NoiseSpec ns;
  ns.seed = 11;
  const SignalBuffer s = make_noise(ns, 8000, 1.0);
  const auto n = static_cast<double>(s.size());
  cplx mean = 0;
  double var_re = 0;
  for (const auto& v : s.samples) mean += v;
  mean /= n;
  for (const auto& v : s.samples) var_re += (v.real() - mean.real()) * (v.real() - mean.real());
  var_re /= n - 1;
  // Standard errors: sqrt(0.5 / n) for the mean, 0.5 sqrt(2 / n) for the variance.
  CHECK(std::abs(mean.real()) < 5 * std::sqrt(0.5 / n));
  CHECK(std::abs(mean.imag()) < 5 * std::sqrt(0.5 / n));
  CHECK(std::abs(var_re - 0.5) < 5 * 0.5 * std::sqrt(2.0 / n));
}

TEST_CASE("analytic noise has no negative-frequency energy") {
  for (const double dur : {0.25, 0.250125}) {  // even and odd lengths
    NoiseSpec ns;
    ns.kind = NoiseKind::analytic;
    ns.seed = 5;
    const SignalBuffer s = make_noise(ns, 8000, dur);
    const auto spec = fft(s.samples);
    const std::size_t n = spec.size();
    double neg = 0, total = 0, peak = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double e = std::norm(spec[k]);
      total += e;
      peak = std::max(peak, std::abs(spec[k]));
      const bool negative = k > n / 2 || (n % 2 == 1 && k == n / 2 + 1);
      if (negative) neg += e;
    }
    for (std::size_t k = n / 2 + 1; k < n; ++k) CHECK(std::abs(spec[k]) < 1e-10 * peak);
    CHECK(neg / total < 1e-20);
  }
}

TEST_CASE("noise is deterministic per seed") {
  NoiseSpec a;
  a.seed = 42;
  NoiseSpec b = a;
  CHECK(make_noise(a, 8000, 0.1).samples == make_noise(b, 8000, 0.1).samples);
  b.seed = 43;
  CHECK(make_noise(a, 8000, 0.1).samples != make_noise(b, 8000, 0.1).samples);
  a.kind = b.kind = NoiseKind::analytic;
  b.seed = 42;
  CHECK(make_noise(a, 8000, 0.1).samples == make_noise(b, 8000, 0.1).samples);
}

TEST_CASE("wav input scaling") {
  const auto dir = testutil::scratch("wav");
  write_wav_bytes(dir / "a.wav", 1, {0, 16384, -32768, 0});
  const SignalBuffer s = read_signal(dir / "a.wav", SignalFormat::wav_pcm16_mono);
  REQUIRE(s.size() == 4);
  CHECK(s.samples[0] == cplx(0, 0));
  CHECK(s.samples[1] == cplx(0.5, 0));
  CHECK(s.samples[2] == cplx(-1.0, 0));
  CHECK(s.samples[3] == cplx(0, 0));
  CHECK(s.sample_rate_hz == 8000.0);
}

TEST_CASE("input errors are distinguishable") {
  const auto dir = testutil::scratch("errors");
  auto reason_of = [](auto&& fn) {
    try {
      fn();
    } catch (const IoError& e) {
      return e.reason();
    }
    FAIL("no IoError thrown");
    return IoError::Reason::write_failed;
  };
  CHECK(reason_of([&] { read_signal(dir / "none.wav", SignalFormat::wav_pcm16_mono); }) ==
        IoError::Reason::missing_file);

  {
    std::ofstream(dir / "junk.wav") << "not a wav file at all";
  }
  CHECK(reason_of([&] { read_signal(dir / "junk.wav", SignalFormat::wav_pcm16_mono); }) ==
        IoError::Reason::malformed_header);

  write_wav_bytes(dir / "stereo.wav", 2, {1, 2, 3, 4});
  CHECK(reason_of([&] { read_signal(dir / "stereo.wav", SignalFormat::wav_pcm16_mono); }) ==
        IoError::Reason::not_mono);

  {
    std::ofstream(dir / "bad.csv") << "re,im\n1.0,0.0\n0.5,oops\n";
  }
  try {
    read_signal(dir / "bad.csv", SignalFormat::csv_complex, 8000);
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(e.reason() == IoError::Reason::unparsable_line);
    CHECK(e.line() == 3);
  }
}

TEST_CASE("csv input and round trip") {
  const auto dir = testutil::scratch("csv");
  {
    std::ofstream(dir / "two.csv") << "1.0,0.0\n0.0,1.0";
  }
  const SignalBuffer s = read_signal(dir / "two.csv", SignalFormat::csv_complex, 100);
  REQUIRE(s.size() == 2);
  CHECK(s.samples[0] == cplx(1, 0));
  CHECK(s.samples[1] == cplx(0, 1));
  CHECK(s.sample_rate_hz == 100.0);

  const SignalBuffer t = make_two_tone(500, 1500, 8000, 0.05);
  write_signal_csv(dir / "t.csv", t);
  const SignalBuffer back = read_signal(dir / "t.csv", SignalFormat::csv_complex, 8000);
  REQUIRE(back.size() == t.size());
  for (std::size_t n = 0; n < t.size(); ++n) CHECK(std::abs(back.samples[n] - t.samples[n]) < 1e-12);
}
