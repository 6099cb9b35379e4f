#include "tfphase/signal.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "tfphase/error.hpp"
#include "tfphase/fft.hpp"

namespace tfphase {

namespace {

std::size_t sample_count(double sample_rate_hz, double duration_s) {
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
    throw InvalidArgument("sample rate must be positive");
  }
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw InvalidArgument("duration must be positive");
  }
  const auto n = static_cast<long long>(std::llround(duration_s * sample_rate_hz));
  if (n < 1) throw InvalidArgument("duration shorter than one sample");
  return static_cast<std::size_t>(n);
}

void check_below_nyquist(double f_hz, double sample_rate_hz) {
  if (!std::isfinite(f_hz) || !(std::abs(f_hz) < 0.5 * sample_rate_hz)) {
    std::ostringstream msg;
    msg << "frequency " << f_hz << " Hz is at or above the Nyquist frequency "
        << 0.5 * sample_rate_hz << " Hz";
    throw InvalidArgument(msg.str());
  }
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_csv_pair(std::string_view line, cplx& out) {
  const auto comma = line.find(',');
  if (comma == std::string_view::npos) return false;
  if (line.find(',', comma + 1) != std::string_view::npos) return false;
  double re = 0.0;
  double im = 0.0;
  if (!parse_double(line.substr(0, comma), re) || !parse_double(line.substr(comma + 1), im)) {
    return false;
  }
  out = {re, im};
  return true;
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

SignalBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoError::Reason::missing_file, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const auto malformed = [&](const std::string& why) {
    return IoError(IoError::Reason::malformed_header, path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw malformed("not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t channels = 0;
  std::uint16_t bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t chunk_size = read_u32(hdr + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_size > bytes.size()) throw malformed("truncated chunk");
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw malformed("fmt chunk too short");
      const std::uint16_t format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format != 1) throw malformed("only PCM (format 1) is supported");
      if (bits != 16) throw malformed("only 16-bit samples are supported");
      if (rate == 0) throw malformed("zero sample rate");
      if (channels != 1) {
        throw IoError(IoError::Reason::not_mono,
                      path.string() + ": expected mono, found " + std::to_string(channels) +
                          " channels");
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) throw malformed("data chunk before fmt chunk");
      SignalBuffer sig;
      sig.sample_rate_hz = rate;
      const std::size_t n = chunk_size / 2;
      sig.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto raw = static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
        sig.samples[i] = {static_cast<double>(raw) / 32768.0, 0.0};
      }
      return sig;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  throw malformed(have_fmt ? "missing data chunk" : "missing fmt chunk");
}

SignalBuffer read_csv(const std::filesystem::path& path, double sample_rate_hz) {
  if (!(sample_rate_hz > 0.0)) throw InvalidArgument("csv input needs a positive sample rate");
  std::ifstream in(path);
  if (!in) throw IoError(IoError::Reason::missing_file, "cannot open " + path.string());
  SignalBuffer sig;
  sig.sample_rate_hz = sample_rate_hz;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty()) continue;
    cplx v;
    if (parse_csv_pair(body, v)) {
      sig.samples.push_back(v);
    } else if (lineno == 1) {
      continue;  // optional header
    } else {
      throw IoError(IoError::Reason::unparsable_line,
                    path.string() + ":" + std::to_string(lineno) + ": cannot parse \"" +
                        std::string(body) + "\"",
                    lineno);
    }
  }
  return sig;
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

void put_u16(std::ofstream& out, std::uint16_t v) {
  const std::array<char, 2> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b.data(), 2);
}

}  // namespace

void SignalBuffer::validate() const {
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
    throw InvalidArgument("signal sample rate must be positive");
  }
  if (samples.empty()) throw InvalidArgument("signal is empty");
}

void NoiseSpec::validate() const {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw InvalidArgument("noise variance must be positive");
  }
}

std::vector<cplx> tone_samples(double f_hz, double sample_rate_hz, std::size_t count) {
  std::vector<cplx> out(count);
  for (std::size_t n = 0; n < count; ++n) {
    out[n] = cis_cycles(f_hz * static_cast<double>(n) / sample_rate_hz);
  }
  return out;
}

SignalBuffer make_pure_tone(double f0_hz, double sample_rate_hz, double duration_s) {
  const std::size_t n = sample_count(sample_rate_hz, duration_s);
  check_below_nyquist(f0_hz, sample_rate_hz);
  return SignalBuffer{tone_samples(f0_hz, sample_rate_hz, n), sample_rate_hz, 0.0};
}

SignalBuffer make_two_tone(double f1_hz, double f2_hz, double sample_rate_hz, double duration_s) {
  const std::size_t n = sample_count(sample_rate_hz, duration_s);
  if (f1_hz == f2_hz) {
    throw InvalidArgument("two-tone signal needs distinct frequencies (f1 = f2 has no zeros)");
  }
  check_below_nyquist(f1_hz, sample_rate_hz);
  check_below_nyquist(f2_hz, sample_rate_hz);
  auto samples = tone_samples(f1_hz, sample_rate_hz, n);
  const auto second = tone_samples(f2_hz, sample_rate_hz, n);
  for (std::size_t i = 0; i < n; ++i) samples[i] += second[i];
  return SignalBuffer{std::move(samples), sample_rate_hz, 0.0};
}

SignalBuffer make_noise(const NoiseSpec& spec, double sample_rate_hz, double duration_s) {
  spec.validate();
  const std::size_t n = sample_count(sample_rate_hz, duration_s);
  std::mt19937_64 rng(spec.seed);
  const double component_sd = std::sqrt(0.5 * spec.variance);
  std::normal_distribution<double> normal(0.0, component_sd);

  SignalBuffer sig;
  sig.sample_rate_hz = sample_rate_hz;
  sig.samples.resize(n);

  if (spec.kind == NoiseKind::circular_complex) {
    for (auto& s : sig.samples) {
      const double re = normal(rng);
      const double im = normal(rng);
      s = {re, im};
    }
    return sig;
  }

  // Analytic: real white noise, one-sided spectrum. DC and Nyquist keep their
  // weight, positive bins double, negative bins vanish.
  for (auto& s : sig.samples) s = {normal(rng), 0.0};
  auto spectrum = fft(sig.samples);
  const std::size_t half = n / 2;
  const bool even = (n % 2) == 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (even && k == half) continue;
    if (k <= (n - 1) / 2) {
      spectrum[k] *= 2.0;
    } else {
      spectrum[k] = 0.0;
    }
  }
  sig.samples = ifft(spectrum);
  return sig;
}

SignalBuffer read_signal(const std::filesystem::path& path, SignalFormat format,
                         double sample_rate_hz) {
  if (!std::filesystem::exists(path)) {
    throw IoError(IoError::Reason::missing_file, "no such file: " + path.string());
  }
  switch (format) {
    case SignalFormat::wav_pcm16_mono: return read_wav(path);
    case SignalFormat::csv_complex: return read_csv(path, sample_rate_hz);
  }
  throw InvalidArgument("unknown signal format");
}

void write_signal_csv(const std::filesystem::path& path, const SignalBuffer& signal, bool header) {
  std::ofstream out(path);
  if (!out) throw IoError(IoError::Reason::write_failed, "cannot write " + path.string());
  if (header) out << "re,im\n";
  std::array<char, 64> buf{};
  for (const auto& s : signal.samples) {
    std::snprintf(buf.data(), buf.size(), "%.17g,%.17g\n", s.real(), s.imag());
    out << buf.data();
  }
  if (!out) throw IoError(IoError::Reason::write_failed, "write failed: " + path.string());
}

void write_signal_wav(const std::filesystem::path& path, const SignalBuffer& signal) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(IoError::Reason::write_failed, "cannot write " + path.string());
  const auto rate = static_cast<std::uint32_t>(std::lround(signal.sample_rate_hz));
  const auto data_bytes = static_cast<std::uint32_t>(signal.samples.size() * 2);
  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, data_bytes);
  for (const auto& s : signal.samples) {
    const double scaled = std::floor(s.real() * 32768.0 + 0.5);
    const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  if (!out) throw IoError(IoError::Reason::write_failed, "write failed: " + path.string());
}

}  // namespace tfphase
