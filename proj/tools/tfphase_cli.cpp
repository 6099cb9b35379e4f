// tfphase command-line front end.
//
//   tfphase stft      --twotone 500,1500 --fs 8000 --dur 0.1 --gauss-sigma 0.005 --out g
//   tfphase phasegrad --twotone 500,1500 --method ratio --patch 5e-4,1000 --out pg
//   tfphase zeros     --noise --seed 3 --dur 0.25 --out z
//   tfphase noisehist --runs 2 --seed 1 --out h
//   tfphase twotone-oracle --twotone 500,1500 --out o
//
// Every command writes <out>.json (effective config, metadata, results) next
// to its data files. Exit codes: 0 ok, 1 usage/validation/unsupported,
// 2 I/O, 3 numerical.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tfphase/error.hpp"
#include "tfphase/export.hpp"
#include "tfphase/oracle.hpp"
#include "tfphase/phasegrad.hpp"
#include "tfphase/signal.hpp"
#include "tfphase/simd/kernels.hpp"
#include "tfphase/stats.hpp"
#include "tfphase/stft.hpp"
#include "tfphase/window.hpp"
#include "tfphase/zeros.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tfphase;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;

// Flat JSON object whose keys are long flag names without the dashes; arrays
// become multi-valued inputs ("twotone": [500, 1500]). CLI11 only reads config
// files on the top-level app, so the items are addressed to the subcommand
// named in *section.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(std::shared_ptr<std::string> section) : section_(std::move(section)) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      CLI::ConfigItem item;
      item.name = key;
      if (!section_->empty()) item.parents = {*section_};
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  std::shared_ptr<std::string> section_;

  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("config values must be scalars or arrays of scalars");
  }
};

// Option values as typed JSON for the sidecar.
json typed(const std::string& s) {
  double d = 0.0;
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, d);
  if (r.ec == std::errc() && r.ptr == end) return d;
  if (s == "true") return true;
  if (s == "false") return false;
  return s;
}

json effective_config(const CLI::App& app) {
  json cfg = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->get_expected_min() == 0) {
      cfg[name] = opt->count() > 0;
      continue;
    }
    const auto& res = opt->results();
    if (!res.empty()) {
      if (res.size() == 1) {
        cfg[name] = typed(res.front());
      } else {
        json arr = json::array();
        for (const auto& r : res) arr.push_back(typed(r));
        cfg[name] = arr;
      }
    } else if (!opt->get_default_str().empty()) {
      cfg[name] = typed(opt->get_default_str());
    }
  }
  return cfg;
}

// Collects validation messages so a bad config is reported once, in full.
struct Problems {
  std::vector<std::string> items;
  void add(const std::string& s) { items.push_back(s); }
  void check(bool ok, const std::string& s) {
    if (!ok) add(s);
  }
  void raise() const {
    if (items.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& s : items) msg += "\n  - " + s;
    throw InvalidArgument(msg);
  }
};

struct SignalOptions {
  std::vector<double> twotone;
  double tone_hz = 0.0;
  bool noise = false;
  std::uint64_t seed = 0;
  double variance = 1.0;
  std::string noise_kind = "circular";
  std::string input;
  std::string format = "csv";
  double fs = 8000.0;
  double duration = 0.1;

  CLI::Option* tone_opt = nullptr;
  CLI::Option* twotone_opt = nullptr;

  void add(CLI::App& app) {
    twotone_opt = app.add_option("--twotone", twotone, "Two-tone signal, frequencies f1,f2 in Hz")
                      ->delimiter(',')
                      ->expected(2);
    tone_opt = app.add_option("--tone", tone_hz, "Pure tone at this frequency (Hz)");
    app.add_flag("--noise", noise, "Gaussian white noise");
    app.add_option("--seed", seed, "Noise seed");
    app.add_option("--variance", variance, "Noise variance");
    app.add_option("--noise-kind", noise_kind, "circular or analytic")
        ->check(CLI::IsMember({"circular", "analytic"}));
    app.add_option("--input", input, "Read the signal from a file");
    app.add_option("--format", format, "Input format: csv (re,im lines) or wav")
        ->check(CLI::IsMember({"csv", "wav"}));
    app.add_option("--fs", fs, "Sample rate in Hz (generated and csv signals)");
    app.add_option("--dur", duration, "Duration in seconds of generated signals");
  }

  bool is_two_tone() const { return !twotone.empty(); }

  void validate(Problems& p) const {
    const int sources = (twotone.empty() ? 0 : 1) + (tone_opt->count() > 0 ? 1 : 0) +
                        (noise ? 1 : 0) + (input.empty() ? 0 : 1);
    p.check(sources == 1, "choose exactly one of --twotone, --tone, --noise, --input");
    p.check(fs > 0.0, "--fs must be > 0");
    if (input.empty()) p.check(duration > 0.0, "--dur must be > 0");
    if (noise) p.check(variance > 0.0, "--variance must be > 0");
  }

  SignalBuffer make() const {
    if (!twotone.empty()) return make_two_tone(twotone[0], twotone[1], fs, duration);
    if (tone_opt->count() > 0) return make_pure_tone(tone_hz, fs, duration);
    if (noise) {
      NoiseSpec ns;
      ns.variance = variance;
      ns.seed = seed;
      ns.kind = noise_kind == "analytic" ? NoiseKind::analytic : NoiseKind::circular_complex;
      return make_noise(ns, fs, duration);
    }
    if (format == "wav") return read_signal(input, SignalFormat::wav_pcm16_mono);
    return read_signal(input, SignalFormat::csv_complex, fs);
  }
};

struct WindowOptions {
  std::string family = "gauss";
  double sigma = 0.005;
  double length = 0.032;
  double truncation = kDefaultTruncationRadius;

  void add(CLI::App& app) {
    app.add_option("--window", family, "gauss, hamming or rect");
    app.add_option("--gauss-sigma", sigma, "Gaussian sigma in seconds");
    app.add_option("--length", length, "Hamming/rectangular support length in seconds");
    app.add_option("--truncation", truncation, "Gaussian truncation radius in sigmas");
  }

  void validate(Problems& p) const {
    try {
      const WindowSpec s = make();
      s.validate();
    } catch (const Error& e) {
      p.add(e.what());
    }
    p.check(truncation > 0.0, "--truncation must be > 0");
  }

  WindowSpec make() const {
    const WindowFamily f = parse_window_family(family);
    if (f == WindowFamily::gaussian) return WindowSpec::gaussian(sigma);
    if (f == WindowFamily::hamming) return WindowSpec::hamming(length);
    return WindowSpec::rectangular(length);
  }
};

struct GridOptions {
  std::size_t hop = 8;
  std::size_t fft = 0;
  std::string convention = "V";

  void add(CLI::App& app) {
    app.add_option("--hop", hop, "Hop in samples");
    app.add_option("--fft", fft, "FFT size (0: automatic)");
    app.add_option("--convention", convention, "V (frequency-invariant) or W (time-invariant)");
  }

  void validate(Problems& p) const {
    p.check(hop >= 1, "--hop must be >= 1");
    try {
      parse_convention(convention);
    } catch (const Error& e) {
      p.add(e.what());
    }
  }

  GridParams make(const WindowOptions& w) const {
    GridParams g;
    g.hop_samples = hop;
    g.fft_size = fft;
    g.truncation_radius = w.truncation;
    return g;
  }
};

struct OutputOptions {
  std::string out;
  bool validate = false;
  bool binary_pgm = false;
  bool no_pgm = false;

  void add(CLI::App& app) {
    app.add_option("--out", out, "Output path prefix (directories are created)")->required();
    app.add_flag("--validate-outputs", validate, "Re-read and check every file written");
    app.add_flag("--binary-pgm", binary_pgm, "Write P5 instead of P2 images");
    app.add_flag("--no-pgm", no_pgm, "Skip the image");
  }

  fs::path path(const std::string& suffix) const { return fs::path(out + suffix); }

  void prepare() const {
    const fs::path parent = fs::path(out).parent_path();
    if (!parent.empty()) {
      std::error_code ec;
      fs::create_directories(parent, ec);
      if (ec) {
        throw IoError(IoError::Reason::write_failed,
                      "cannot create output directory " + parent.string() + ": " + ec.message());
      }
    }
  }
};

json signal_json(const SignalBuffer& f) {
  return {{"samples", f.size()}, {"sample_rate_hz", f.sample_rate_hz},
          {"start_time_s", f.start_time_s}};
}

json grid_json(const StftGrid& g) {
  std::size_t boundary = 0;
  for (const auto b : g.boundary_frame) boundary += b;
  return {{"bins", g.bins()},
          {"frames", g.frames()},
          {"time_step_s", g.time_step_s()},
          {"freq_step_hz", g.freq_step_hz()},
          {"fft_size", g.fft_size},
          {"hop_samples", g.hop_samples},
          {"convention", to_string(g.convention)},
          {"kind", to_string(g.kind)},
          {"variant", to_string(g.variant_used)},
          {"window", to_string(g.window.family)},
          {"boundary_frames", boundary}};
}

void write_sidecar(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void check_json_file(const fs::path& path) {
  try {
    const json j = json::parse(read_text(path));
    if (j.is_discarded()) throw IoError(IoError::Reason::malformed_header, path.string());
  } catch (const json::exception& e) {
    throw IoError(IoError::Reason::malformed_header, path.string() + ": " + e.what());
  }
}

void check_csv_header(const fs::path& path, const std::string& header, std::size_t columns) {
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1) {
      if (line != header) {
        throw IoError(IoError::Reason::malformed_header,
                      path.string() + ": expected header '" + header + "'", 1);
      }
      continue;
    }
    const auto commas = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    if (commas + 1 != columns) {
      throw IoError(IoError::Reason::unparsable_line,
                    path.string() + ": wrong column count on line " + std::to_string(n), n);
    }
  }
  if (n == 0) throw IoError(IoError::Reason::malformed_header, path.string() + ": empty file");
}

void check_grid(const fs::path& path, const Grid2D<double>& shape_rows_cols, bool complex_cells) {
  const GridCsvInfo info = validate_grid_csv(path, complex_cells);
  if (info.rows != shape_rows_cols.rows() || info.columns != shape_rows_cols.cols()) {
    throw IoError(IoError::Reason::malformed_header, path.string() + ": grid shape mismatch");
  }
}

void check_pgm(const fs::path& path, std::size_t width, std::size_t height) {
  const PgmInfo info = validate_pgm(path);
  if (info.width != width || info.height != height) {
    throw IoError(IoError::Reason::malformed_header, path.string() + ": image shape mismatch");
  }
}

// Common parts of the commands that compute a grid.
struct GridCommand {
  SignalOptions signal;
  WindowOptions window;
  GridOptions grid;
  OutputOptions output;

  void add(CLI::App& app) {
    signal.add(app);
    window.add(app);
    grid.add(app);
    output.add(app);
  }

  void validate(Problems& p) const {
    signal.validate(p);
    window.validate(p);
    grid.validate(p);
  }
};

// ---- stft

struct StftCommand : GridCommand {
  std::string variant = "g";

  void add(CLI::App& app) {
    GridCommand::add(app);
    app.add_option("--variant", variant, "Window variant: g, neg_Dg, Mg, D2g, M2g");
  }

  json run(const CLI::App& app) {
    Problems p;
    validate(p);
    try {
      parse_window_variant(variant);
    } catch (const Error& e) {
      p.add(e.what());
    }
    p.raise();

    const WindowSpec spec = window.make();
    require_variant_supported(spec, parse_window_variant(variant));
    const SignalBuffer f = signal.make();
    const StftGrid g = stft_grid(f, spec, parse_window_variant(variant), grid.make(window),
                                 parse_convention(grid.convention));

    output.prepare();
    json outputs = json::array();
    write_grid_csv(output.path(".csv"), g);
    outputs.push_back(output.path(".csv").string());
    const Grid2D<double> db = modulus_db(g);
    if (!output.no_pgm) {
      write_pgm(output.path(".pgm"), db, nullptr, ValueRange{-120.0, 0.0}, output.binary_pgm);
      outputs.push_back(output.path(".pgm").string());
    }

    json side = {{"command", "stft"},
                 {"config", effective_config(app)},
                 {"signal", signal_json(f)},
                 {"grid", grid_json(g)},
                 {"max_abs", g.max_abs()},
                 {"image", {{"quantity", "modulus_db"}, {"vmin", -120.0}, {"vmax", 0.0}}},
                 {"outputs", outputs}};
    write_sidecar(output.path(".json"), side);

    if (output.validate) {
      check_grid(output.path(".csv"), db, true);
      if (!output.no_pgm) check_pgm(output.path(".pgm"), g.frames(), g.bins());
      check_json_file(output.path(".json"));
    }
    return side;
  }
};

// ---- phasegrad

struct PhaseGradCommand : GridCommand {
  std::string direction = "d_dx";
  std::string method = "ratio";
  double threshold = kDefaultMaskThreshold;
  bool hz = false;
  std::optional<double> vmin;
  std::optional<double> vmax;
  std::vector<double> patch;
  std::size_t patch_half_width = 16;
  double unwrap_error_fraction = UnwrapOptions{}.max_error_fraction;

  void add(CLI::App& app) {
    GridCommand::add(app);
    app.add_option("--direction", direction, "d_dx (over time) or d_domega (over frequency)");
    app.add_option("--method", method, "ratio, cartesian or unwrap")
        ->check(CLI::IsMember({"ratio", "cartesian", "unwrap"}));
    app.add_option("--threshold", threshold, "Mask cells with |V| below threshold * max|V|");
    app.add_flag("--hz", hz, "Report values divided by 2 pi");
    app.add_option("--vmin", vmin, "Image range lower end (default: median - 3 IQR)");
    app.add_option("--vmax", vmax, "Image range upper end (default: median + 3 IQR)");
    app.add_option("--patch", patch, "Write a patch around x_s,omega_hz")
        ->delimiter(',')
        ->expected(2);
    app.add_option("--patch-half-width", patch_half_width, "Patch half width in cells");
    app.add_option("--unwrap-error-fraction", unwrap_error_fraction,
                   "Unwrap route: largest tolerated differencing error, fraction of Nyquist");
  }

  json run(const CLI::App& app) {
    Problems p;
    validate(p);
    p.check(threshold >= 0.0, "--threshold must be >= 0");
    p.check(unwrap_error_fraction > 0.0, "--unwrap-error-fraction must be > 0");
    if (vmin && vmax) p.check(*vmax > *vmin, "--vmax must exceed --vmin");
    try {
      parse_phase_direction(direction);
    } catch (const Error& e) {
      p.add(e.what());
    }
    p.raise();

    const WindowSpec spec = window.make();
    const PhaseDirection dir = parse_phase_direction(direction);
    const Convention conv = parse_convention(grid.convention);
    const SignalBuffer f = signal.make();
    const GridParams gp = grid.make(window);

    PhaseGradGrid pg;
    StftGrid v;
    if (method == "unwrap") {
      v = stft_grid(f, spec, WindowVariant::g, gp, conv);
      UnwrapOptions uo;
      uo.threshold_rel = threshold;
      uo.max_error_fraction = unwrap_error_fraction;
      pg = phase_deriv_unwrap(v, dir, uo);
    } else {
      const DerivativeStfts d = derivative_stfts(f, spec, gp, conv);
      const StftGrid& aux = dir == PhaseDirection::d_dx ? d.vx : d.vomega;
      pg = method == "ratio" ? phase_deriv_ratio(d.v, aux, dir, threshold)
                             : phase_deriv_cartesian(d.v, aux, dir, threshold);
      v = d.v;
    }
    const double scale = hz ? 1.0 / kTwoPi : 1.0;
    Grid2D<double> scaled = pg.values;
    for (auto& x : scaled.storage()) x *= scale;

    ValueRange range = robust_range(scaled, &pg.mask);
    if (vmin) range.vmin = *vmin;
    if (vmax) range.vmax = *vmax;
    if (!(range.vmax > range.vmin)) range.vmax = range.vmin + 1.0;

    output.prepare();
    json outputs = json::array();
    write_phasegrad_csv(output.path(".csv"), pg, scale);
    outputs.push_back(output.path(".csv").string());
    if (!output.no_pgm) {
      write_pgm(output.path(".pgm"), scaled, &pg.mask, range, output.binary_pgm);
      outputs.push_back(output.path(".pgm").string());
    }
    if (!patch.empty()) {
      write_patch_csv(output.path("_patch.csv"), pg, TfPoint{patch[0], patch[1]}, patch_half_width,
                      scale);
      outputs.push_back(output.path("_patch.csv").string());
    }

    json side = {{"command", "phasegrad"},
                 {"config", effective_config(app)},
                 {"signal", signal_json(f)},
                 {"grid", grid_json(v)},
                 {"direction", to_string(dir)},
                 {"method", method},
                 {"units", dir == PhaseDirection::d_dx ? (hz ? "Hz" : "rad/s")
                                                       : (hz ? "s" : "rad/Hz")},
                 {"threshold_rel", threshold},
                 {"valid_cells", pg.valid_count()},
                 {"masked_cells", pg.values.size() - pg.valid_count()},
                 {"image", {{"vmin", range.vmin}, {"vmax", range.vmax}}},
                 {"outputs", outputs}};
    write_sidecar(output.path(".json"), side);

    if (output.validate) {
      check_grid(output.path(".csv"), scaled, false);
      if (!output.no_pgm) check_pgm(output.path(".pgm"), pg.frames(), pg.bins());
      if (!patch.empty()) {
        check_csv_header(output.path("_patch.csv"), "time_s,freq_hz,value", 3);
      }
      check_json_file(output.path(".json"));
    }
    return side;
  }
};

// ---- zeros

struct ZerosCommand : GridCommand {
  double rel_floor = DetectOptions{}.rel_floor;
  double tol = RefineOptions{}.tol;
  int max_iter = RefineOptions{}.max_iter;
  int steps = AnalyzeOptions{}.n_steps;
  double eps0_hz = 0.0;
  double eps0_s = 0.0;
  bool no_profiles = false;

  void add(CLI::App& app) {
    GridCommand::add(app);
    app.add_option("--rel-floor", rel_floor, "Candidate minima must lie below this * max|V|");
    app.add_option("--tol", tol, "Newton stops when |V| < tol * max|V|");
    app.add_option("--max-iter", max_iter, "Newton iteration limit");
    app.add_option("--steps", steps, "Number of eps values per profile");
    app.add_option("--eps0-hz", eps0_hz, "First frequency offset (0: automatic)");
    app.add_option("--eps0-s", eps0_s, "First time offset (0: automatic)");
    app.add_flag("--no-profiles", no_profiles, "Skip the divergence profiles and limits");
  }

  json run(const CLI::App& app) {
    Problems p;
    validate(p);
    p.check(rel_floor > 0.0, "--rel-floor must be > 0");
    p.check(tol > 0.0, "--tol must be > 0");
    p.check(max_iter >= 1, "--max-iter must be >= 1");
    p.check(steps >= 3, "--steps must be >= 3");
    p.check(eps0_hz >= 0.0 && eps0_s >= 0.0, "--eps0-hz and --eps0-s must be >= 0");
    if (signal.is_two_tone() || signal.tone_opt->count() > 0) {
      p.check(window.make().family != WindowFamily::rectangular || no_profiles,
              "profiles need a differentiable window");
    }
    p.raise();

    const WindowSpec spec = window.make();
    if (!spec.differentiable()) {
      throw UnsupportedOperation("zero refinement needs a differentiable window");
    }
    const SignalBuffer f = signal.make();
    const StftGrid g =
        stft_grid(f, spec, WindowVariant::g, grid.make(window), Convention::V_freq_invariant);

    AnalyzeOptions ao;
    ao.detect.rel_floor = rel_floor;
    ao.refine.tol = tol;
    ao.refine.max_iter = max_iter;
    ao.refine.truncation_radius = window.truncation;
    ao.n_steps = steps;
    ao.eps0_omega_hz = eps0_hz;
    ao.eps0_x_s = eps0_s;
    ao.profiles = !no_profiles && spec.family == WindowFamily::gaussian;
    ZeroSummary summary;
    const std::vector<ZeroReport> reports = analyze_zeros(f, g, ao, &summary);

    json arr = json::array();
    for (const auto& r : reports) {
      json j = to_json(r);
      if (signal.is_two_tone() && spec.family == WindowFamily::gaussian) {
        const oracle::TwoToneParams tp{signal.twotone[0], signal.twotone[1], spec.sigma_s};
        const auto near = oracle::two_tone_zeros_between(tp, r.location.x_s - 1.0,
                                                         r.location.x_s + 1.0);
        double best = INFINITY;
        TfPoint bp{};
        for (const auto& z : near) {
          if (std::abs(z.x_s - r.location.x_s) < best) {
            best = std::abs(z.x_s - r.location.x_s);
            bp = z;
          }
        }
        if (std::isfinite(best)) {
          j["lattice_residual"] = {{"dx_s", r.location.x_s - bp.x_s},
                                   {"domega_hz", r.location.omega_hz - bp.omega_hz}};
        }
      }
      arr.push_back(std::move(j));
    }

    output.prepare();
    json outputs = json::array();
    write_text(output.path("_zeros.json"), arr.dump(2) + "\n");
    outputs.push_back(output.path("_zeros.json").string());
    std::string table =
        "count,candidates,failed,classified,classified_interior,pattern_pass,pass_rate,"
        "mean_slope_below,mean_slope_above\n";
    table += std::to_string(reports.size()) + "," + std::to_string(summary.candidates) + "," +
             std::to_string(summary.failed) + "," + std::to_string(summary.classified) + "," +
             std::to_string(summary.classified_interior) + "," +
             std::to_string(summary.pattern_pass) + "," + format_number(summary.pass_rate) + "," +
             format_number(summary.mean_slope_below) + "," +
             format_number(summary.mean_slope_above) + "\n";
    write_text(output.path("_summary.csv"), table);
    outputs.push_back(output.path("_summary.csv").string());

    json side = {{"command", "zeros"},
                 {"config", effective_config(app)},
                 {"signal", signal_json(f)},
                 {"grid", grid_json(g)},
                 {"profiles", ao.profiles},
                 {"summary", to_json(summary)},
                 {"outputs", outputs}};
    write_sidecar(output.path(".json"), side);

    if (output.validate) {
      const json back = json::parse(read_text(output.path("_zeros.json")));
      if (!back.is_array()) {
        throw IoError(IoError::Reason::malformed_header, "zero report file is not an array");
      }
      for (const auto& j : back) validate_zero_report_json(j);
      check_csv_header(output.path("_summary.csv"),
                       table.substr(0, table.find('\n')), 9);
      check_json_file(output.path(".json"));
    }
    return side;
  }
};

// ---- noisehist

struct NoiseHistCommand {
  std::size_t runs = 2;
  std::uint64_t seed = 1;
  double variance = 1.0;
  std::string noise_kind = "circular";
  double fs = 8000.0;
  double duration = 1.0;
  WindowOptions window;
  std::size_t hop = 20;
  std::size_t fft = 512;
  std::string convention = "V";
  std::string centering = "per_bin_median";
  double threshold = kDefaultMaskThreshold;
  std::size_t bins = 200;
  OutputOptions output;

  void add(CLI::App& app) {
    app.add_option("--runs", runs, "Number of noise realizations");
    app.add_option("--seed", seed, "Seed of the first run; run i uses seed + i");
    app.add_option("--variance", variance, "Noise variance");
    app.add_option("--noise-kind", noise_kind, "circular or analytic")
        ->check(CLI::IsMember({"circular", "analytic"}));
    app.add_option("--fs", fs, "Sample rate in Hz");
    app.add_option("--dur", duration, "Duration of each run in seconds");
    window.add(app);
    app.add_option("--hop", hop, "Hop in samples");
    app.add_option("--fft", fft, "FFT size");
    app.add_option("--convention", convention, "V or W");
    app.add_option("--centering", centering, "none, subtract_2pi_omega or per_bin_median");
    app.add_option("--threshold", threshold, "Mask threshold relative to max|V|");
    app.add_option("--bins", bins, "Histogram bins over +-10 fitted scales");
    output.add(app);
  }

  json run(const CLI::App& app) {
    Problems p;
    window.validate(p);
    p.check(runs >= 1, "--runs must be >= 1");
    p.check(variance > 0.0, "--variance must be > 0");
    p.check(fs > 0.0, "--fs must be > 0");
    p.check(duration > 0.0, "--dur must be > 0");
    p.check(hop >= 1, "--hop must be >= 1");
    p.check(bins >= 1, "--bins must be >= 1");
    try {
      parse_convention(convention);
      parse_centering(centering);
    } catch (const Error& e) {
      p.add(e.what());
    }
    p.raise();

    const WindowSpec spec = window.make();
    std::vector<NoiseSpec> specs(runs);
    for (std::size_t i = 0; i < runs; ++i) {
      specs[i].variance = variance;
      specs[i].seed = seed + i;
      specs[i].kind = noise_kind == "analytic" ? NoiseKind::analytic : NoiseKind::circular_complex;
    }
    CollectOptions co;
    co.grid.hop_samples = hop;
    co.grid.fft_size = fft;
    co.grid.truncation_radius = window.truncation;
    co.convention = parse_convention(convention);
    co.centering = parse_centering(centering);
    co.threshold_rel = threshold;
    const SampleSet set = collect_phase_deriv_samples(specs, fs, duration, spec, co);
    const FitResult fit = fit_and_test(set.samples, bins);

    output.prepare();
    json outputs = json::array();
    write_histogram_csv(output.path("_hist.csv"), fit.histogram);
    outputs.push_back(output.path("_hist.csv").string());

    json fit_j = to_json(fit.fit, co.centering);
    fit_j["masked"] = set.masked;
    fit_j["runs"] = set.runs;
    fit_j["rho0_scaled"] = rho_density(0.0) / fit.fit.scale;
    if (spec.family == WindowFamily::gaussian) {
      // Scale derived for circular white noise: sqrt(pi / 2) / sigma in rad/s.
      fit_j["reference_scale"] = std::sqrt(kPi / 2.0) / spec.sigma_s;
    }
    json side = {{"command", "noisehist"},
                 {"config", effective_config(app)},
                 {"fit", fit_j},
                 {"histogram", {{"bins", bins},
                                {"lo", fit.histogram.edges.front()},
                                {"hi", fit.histogram.edges.back()},
                                {"outside", fit.histogram.outside}}},
                 {"outputs", outputs}};
    if (!set.warning.empty()) side["warning"] = set.warning;
    write_sidecar(output.path(".json"), side);

    if (output.validate) {
      check_csv_header(output.path("_hist.csv"), "bin_left,bin_right,density", 3);
      check_json_file(output.path(".json"));
    }
    return side;
  }
};

// ---- twotone-oracle

struct OracleCommand {
  std::vector<double> twotone;
  double sigma = 0.005;
  double fs = 8000.0;
  double duration = 0.1;
  std::size_t hop = 8;
  std::size_t fft = 1024;
  OutputOptions output;

  void add(CLI::App& app) {
    app.add_option("--twotone", twotone, "Frequencies f1,f2 in Hz")
        ->delimiter(',')
        ->expected(2)
        ->required();
    app.add_option("--gauss-sigma", sigma, "Gaussian sigma in seconds");
    app.add_option("--fs", fs, "Sample rate defining the lattice");
    app.add_option("--dur", duration, "Time span in seconds");
    app.add_option("--hop", hop, "Hop in samples");
    app.add_option("--fft", fft, "Number of frequency bins over [0, fs)");
    output.add(app);
  }

  json run(const CLI::App& app) {
    Problems p;
    p.check(sigma > 0.0, "--gauss-sigma must be > 0");
    p.check(fs > 0.0, "--fs must be > 0");
    p.check(duration > 0.0, "--dur must be > 0");
    p.check(hop >= 1 && fft >= 1, "--hop and --fft must be >= 1");
    p.check(twotone.size() == 2 && twotone[0] != twotone[1], "--twotone needs two distinct values");
    p.raise();

    const oracle::TwoToneParams tp{twotone[0], twotone[1], sigma};
    tp.validate();
    const auto n = static_cast<std::size_t>(std::llround(duration * fs));
    const std::size_t frames = n == 0 ? 1 : (n - 1) / hop + 1;

    // Same lattice as the numerical grid of a signal of this length.
    StftGrid g;
    g.convention = Convention::W_time_invariant;
    g.window = WindowSpec::gaussian(sigma);
    g.sample_rate_hz = fs;
    g.hop_samples = hop;
    g.fft_size = fft;
    g.coeffs = Grid2D<cplx>(fft, frames);
    g.time_axis_s.resize(frames);
    g.freq_axis_hz.resize(fft);
    for (std::size_t m = 0; m < frames; ++m) {
      g.time_axis_s[m] = static_cast<double>(m * hop) / fs;
    }
    for (std::size_t k = 0; k < fft; ++k) g.freq_axis_hz[k] = static_cast<double>(k) * fs / fft;

    PhaseGradGrid pd;
    pd.values = Grid2D<double>(fft, frames, NAN);
    pd.mask = Grid2D<std::uint8_t>(fft, frames, 0);
    pd.time_axis_s = g.time_axis_s;
    pd.freq_axis_hz = g.freq_axis_hz;
    pd.convention = Convention::W_time_invariant;
    const double mass = oracle::gaussian_window_mass(sigma);
    for (std::size_t k = 0; k < fft; ++k) {
      for (std::size_t m = 0; m < frames; ++m) {
        const double x = g.time_axis_s[m];
        const double w = g.freq_axis_hz[k];
        g.coeffs(k, m) = mass * oracle::two_tone_stft(tp, x, w);
        try {
          pd.values(k, m) = oracle::two_tone_phase_deriv(tp, x, w);
          pd.mask(k, m) = 1;
        } catch (const DomainError&) {
        }
      }
    }

    output.prepare();
    json outputs = json::array();
    write_grid_csv(output.path("_stft.csv"), g);
    outputs.push_back(output.path("_stft.csv").string());
    write_phasegrad_csv(output.path("_dphase.csv"), pd);
    outputs.push_back(output.path("_dphase.csv").string());
    std::string lattice = "x_s,omega_hz\n";
    const auto zs = oracle::two_tone_zeros_between(tp, 0.0, g.time_axis_s.back());
    for (const auto& z : zs) lattice += format_number(z.x_s) + "," + format_number(z.omega_hz) + "\n";
    write_text(output.path("_zeros.csv"), lattice);
    outputs.push_back(output.path("_zeros.csv").string());

    json side = {{"command", "twotone-oracle"},
                 {"config", effective_config(app)},
                 {"convention", "W"},
                 {"window_mass", mass},
                 {"bins", fft},
                 {"frames", frames},
                 {"zeros", zs.size()},
                 {"units", {{"stft", "closed form times window mass"}, {"dphase", "rad/s"}}},
                 {"outputs", outputs}};
    write_sidecar(output.path(".json"), side);

    if (output.validate) {
      check_grid(output.path("_stft.csv"), pd.values, true);
      check_grid(output.path("_dphase.csv"), pd.values, false);
      check_csv_header(output.path("_zeros.csv"), "x_s,omega_hz", 2);
      check_json_file(output.path(".json"));
    }
    return side;
  }
};

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::io: return kExitIo;
    case ErrorKind::numerical:
    case ErrorKind::domain: return kExitNumerical;
    case ErrorKind::invalid_argument:
    case ErrorKind::unsupported: return kExitUsage;
  }
  return kExitUsage;
}

CLI::App* subcommand(CLI::App& app, const std::string& name, const std::string& help) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->option_defaults()->always_capture_default();
  sub->fallthrough();  // --config belongs to the parent
  return sub;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase derivatives and zeros of the short-time Fourier transform"};
  app.require_subcommand(1);
  auto section = std::make_shared<std::string>();
  app.config_formatter(std::make_shared<JsonConfig>(section));
  app.set_config("--config", "", "JSON file with flag values (command-line flags win)");
  app.allow_config_extras(CLI::config_extras_mode::error);
  bool show_kernels = false;
  app.add_flag("--kernels", show_kernels, "Print the selected SIMD kernel set to stderr");

  StftCommand stft_cmd;
  PhaseGradCommand pg_cmd;
  ZerosCommand zeros_cmd;
  NoiseHistCommand hist_cmd;
  OracleCommand oracle_cmd;

  CLI::App* s_stft = subcommand(app, "stft", "Transform grid, sidecar and modulus image");
  stft_cmd.add(*s_stft);
  CLI::App* s_pg = subcommand(app, "phasegrad", "Phase derivative grid");
  pg_cmd.add(*s_pg);
  CLI::App* s_zeros = subcommand(app, "zeros", "Detect, refine and classify zeros");
  zeros_cmd.add(*s_zeros);
  CLI::App* s_hist = subcommand(app, "noisehist", "Phase-derivative histogram of white noise");
  hist_cmd.add(*s_hist);
  CLI::App* s_oracle = subcommand(app, "twotone-oracle", "Closed-form two-tone transform");
  oracle_cmd.add(*s_oracle);

  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "stft" || a == "phasegrad" || a == "zeros" || a == "noisehist" ||
        a == "twotone-oracle") {
      *section = a;
      break;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::FileError& e) {
    std::cerr << "error (i/o error): " << e.what() << "\n";
    return kExitIo;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (show_kernels) std::cerr << "kernels: " << simd::to_string(simd::active_isa()) << "\n";

  try {
    json side;
    if (s_stft->parsed()) side = stft_cmd.run(*s_stft);
    if (s_pg->parsed()) side = pg_cmd.run(*s_pg);
    if (s_zeros->parsed()) side = zeros_cmd.run(*s_zeros);
    if (s_hist->parsed()) side = hist_cmd.run(*s_hist);
    if (s_oracle->parsed()) side = oracle_cmd.run(*s_oracle);
    for (const auto& o : side["outputs"]) std::cout << o.get<std::string>() << "\n";
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
