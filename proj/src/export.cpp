#include "tfphase/export.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "tfphase/error.hpp"

namespace tfphase {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) {
    throw IoError(IoError::Reason::write_failed, "cannot open '" + path.string() + "' for writing");
  }
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError(IoError::Reason::write_failed, "failed writing '" + path.string() + "'");
}

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError(IoError::Reason::missing_file, "cannot open '" + path.string() + "'");
  return in;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool parse_double(std::string_view s, double& v) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  return r.ec == std::errc{} && r.ptr == s.data() + s.size();
}

// "re+imj" / "re-imj"
bool parse_complex(std::string_view s, cplx& z) {
  if (s.size() < 2 || s.back() != 'j') return false;
  s.remove_suffix(1);
  std::size_t split = std::string_view::npos;
  for (std::size_t i = s.size(); i-- > 1;) {
    if ((s[i] == '+' || s[i] == '-') && s[i - 1] != 'e' && s[i - 1] != 'E') {
      split = i;
      break;
    }
  }
  if (split == std::string_view::npos) return false;
  double re = 0.0, im = 0.0;
  if (!parse_double(s.substr(0, split), re)) return false;
  if (!parse_double(s.substr(split), im)) {
    // from_chars does not accept a leading '+' or "-nan"; handle the sign here.
    std::string_view rest = s.substr(split + 1);
    if (!parse_double(rest, im)) return false;
    if (s[split] == '-') im = -im;
  }
  z = {re, im};
  return true;
}

template <typename CellWriter>
void write_grid(const std::filesystem::path& path, const std::vector<double>& time_axis,
                const std::vector<double>& freq_axis, CellWriter cell) {
  auto out = open_out(path);
  std::string line = "freq_hz/time_s";
  for (const double t : time_axis) {
    line += ',';
    line += format_number(t);
  }
  out << line << '\n';
  for (std::size_t k = 0; k < freq_axis.size(); ++k) {
    line = format_number(freq_axis[k]);
    for (std::size_t m = 0; m < time_axis.size(); ++m) {
      line += ',';
      line += cell(k, m);
    }
    out << line << '\n';
  }
  finish(out, path);
}

nlohmann::json nan_to_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json series(const std::vector<double>& v) {
  auto a = nlohmann::json::array();
  for (const double x : v) a.push_back(nan_to_null(x));
  return a;
}

nlohmann::json to_json(const DivergenceFit& f) {
  return {{"epsilons", series(f.epsilons)},
          {"values_below", series(f.values_below)},
          {"values_above", series(f.values_above)},
          {"slope_below", nan_to_null(f.loglog_slope_below)},
          {"slope_above", nan_to_null(f.loglog_slope_above)},
          {"sign_below", f.sign_below},
          {"sign_above", f.sign_above}};
}

nlohmann::json to_json(const FiniteLimit& l) {
  return {{"formula", nan_to_null(l.formula)},
          {"epsilons", series(l.epsilons)},
          {"symmetric", series(l.symmetric)},
          {"bounded", l.bounded},
          {"last_step_change", nan_to_null(l.last_step_change)}};
}

[[noreturn]] void schema_error(const std::string& what) {
  throw IoError(IoError::Reason::malformed_header, "zero report schema: " + what);
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_complex(cplx z) {
  std::string s = format_number(z.real());
  const double im = z.imag();
  if (std::signbit(im)) {
    s += '-';
    s += format_number(-im);
  } else {
    s += '+';
    s += format_number(im);
  }
  s += 'j';
  return s;
}

void write_grid_csv(const std::filesystem::path& path, const StftGrid& grid) {
  write_grid(path, grid.time_axis_s, grid.freq_axis_hz,
             [&](std::size_t k, std::size_t m) { return format_complex(grid.coeffs(k, m)); });
}

void write_phasegrad_csv(const std::filesystem::path& path, const PhaseGradGrid& grid,
                         double scale) {
  write_grid(path, grid.time_axis_s, grid.freq_axis_hz, [&](std::size_t k, std::size_t m) {
    return grid.valid(k, m) ? format_number(scale * grid.values(k, m)) : std::string();
  });
}

GridCsvInfo validate_grid_csv(const std::filesystem::path& path, bool complex_cells) {
  auto in = open_in(path);
  std::string line;
  GridCsvInfo info;
  if (!std::getline(in, line)) {
    throw IoError(IoError::Reason::malformed_header, "'" + path.string() + "' is empty", 1);
  }
  const auto header = split_commas(line);
  if (header.empty() || header[0] != "freq_hz/time_s") {
    throw IoError(IoError::Reason::malformed_header,
                  "'" + path.string() + "' lacks the freq_hz/time_s header", 1);
  }
  for (std::size_t i = 1; i < header.size(); ++i) {
    double v = 0.0;
    if (!parse_double(header[i], v)) {
      throw IoError(IoError::Reason::malformed_header, "bad time value in header", 1);
    }
  }
  info.columns = header.size() - 1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cells = split_commas(line);
    if (cells.size() != info.columns + 1) {
      throw IoError(IoError::Reason::unparsable_line,
                    "line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                        " fields, expected " + std::to_string(info.columns + 1),
                    line_no);
    }
    double v = 0.0;
    if (!parse_double(cells[0], v)) {
      throw IoError(IoError::Reason::unparsable_line, "bad frequency value", line_no);
    }
    for (std::size_t i = 1; i < cells.size(); ++i) {
      if (cells[i].empty()) {
        ++info.empty_cells;
        continue;
      }
      cplx z;
      const bool ok = complex_cells ? parse_complex(cells[i], z) : parse_double(cells[i], v);
      if (!ok) {
        throw IoError(IoError::Reason::unparsable_line,
                      "unparsable cell '" + std::string(cells[i]) + "'", line_no);
      }
    }
    ++info.rows;
  }
  return info;
}

ParsedGrid read_grid_csv(const std::filesystem::path& path) {
  validate_grid_csv(path, true);
  auto in = open_in(path);
  ParsedGrid g;
  std::string line;
  std::getline(in, line);
  const auto header = split_commas(line);
  for (std::size_t i = 1; i < header.size(); ++i) {
    double v = 0.0;
    parse_double(header[i], v);
    g.time_axis_s.push_back(v);
  }
  std::vector<cplx> cells;
  while (std::getline(in, line)) {
    const auto parts = split_commas(line);
    double w = 0.0;
    parse_double(parts[0], w);
    g.freq_axis_hz.push_back(w);
    for (std::size_t i = 1; i < parts.size(); ++i) {
      cplx z{kNaN, kNaN};
      if (!parts[i].empty()) parse_complex(parts[i], z);
      cells.push_back(z);
    }
  }
  g.cells = Grid2D<cplx>(g.freq_axis_hz.size(), g.time_axis_s.size());
  std::copy(cells.begin(), cells.end(), g.cells.storage().begin());
  return g;
}

ValueRange robust_range(const Grid2D<double>& values, const Grid2D<std::uint8_t>* mask) {
  std::vector<double> v;
  v.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (mask != nullptr && mask->storage()[i] == 0) continue;
    if (std::isfinite(values.storage()[i])) v.push_back(values.storage()[i]);
  }
  if (v.empty()) return {};
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] + frac * (v[i + 1] - v[i]) : v[i];
  };
  const double med = quantile(0.5);
  const double iqr = quantile(0.75) - quantile(0.25);
  if (!(iqr > 0.0)) return {med - 0.5, med + 0.5};
  return {med - 3.0 * iqr, med + 3.0 * iqr};
}

void write_pgm(const std::filesystem::path& path, const Grid2D<double>& values,
               const Grid2D<std::uint8_t>* mask, ValueRange range, bool binary) {
  if (!(range.vmax > range.vmin)) throw InvalidArgument("PGM range needs vmax > vmin");
  if (mask != nullptr && (mask->rows() != values.rows() || mask->cols() != values.cols())) {
    throw InvalidArgument("PGM mask does not match the value grid");
  }
  const std::size_t width = values.cols();
  const std::size_t height = values.rows();
  auto out = open_out(path, binary);
  out << (binary ? "P5" : "P2") << '\n' << width << ' ' << height << '\n' << 65535 << '\n';
  std::string text;
  for (std::size_t r = 0; r < height; ++r) {
    const std::size_t k = height - 1 - r;
    text.clear();
    for (std::size_t m = 0; m < width; ++m) {
      unsigned level = 65535;
      const double v = values(k, m);
      if ((mask == nullptr || (*mask)(k, m) != 0) && !std::isnan(v)) {
        const double t = std::clamp((v - range.vmin) / (range.vmax - range.vmin), 0.0, 1.0);
        level = static_cast<unsigned>(std::lround(t * 65534.0));
      }
      if (binary) {
        out.put(static_cast<char>((level >> 8) & 0xFF));
        out.put(static_cast<char>(level & 0xFF));
      } else {
        if (m > 0) text += ' ';
        text += std::to_string(level);
      }
    }
    if (!binary) out << text << '\n';
  }
  finish(out, path);
}

Grid2D<double> modulus_db(const StftGrid& grid) {
  Grid2D<double> db(grid.bins(), grid.frames());
  const double peak = grid.max_abs();
  for (std::size_t i = 0; i < db.size(); ++i) {
    const double a = std::abs(grid.coeffs.storage()[i]);
    const double v = (peak > 0.0 && a > 0.0) ? 20.0 * std::log10(a / peak) : -120.0;
    db.storage()[i] = std::clamp(v, -120.0, 0.0);
  }
  return db;
}

PgmInfo validate_pgm(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  std::string magic;
  PgmInfo info;
  in >> magic >> info.width >> info.height >> info.maxval;
  if (!in || (magic != "P2" && magic != "P5") || info.maxval == 0 || info.maxval > 65535) {
    throw IoError(IoError::Reason::malformed_header, "'" + path.string() + "' is not a PGM file");
  }
  const std::size_t n = info.width * info.height;
  if (magic == "P2") {
    for (std::size_t i = 0; i < n; ++i) {
      unsigned v = 0;
      if (!(in >> v) || v > info.maxval) {
        throw IoError(IoError::Reason::unparsable_line,
                      "'" + path.string() + "' has a bad or missing pixel " + std::to_string(i));
      }
    }
    std::string extra;
    if (in >> extra) throw IoError(IoError::Reason::unparsable_line, "trailing data in PGM");
  } else {
    in.get();  // single whitespace after maxval
    const std::size_t bytes = n * (info.maxval > 255 ? 2 : 1);
    std::vector<char> buf(bytes);
    in.read(buf.data(), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes || in.peek() != EOF) {
      throw IoError(IoError::Reason::unparsable_line, "'" + path.string() + "' has wrong size");
    }
  }
  return info;
}

void write_patch_csv(const std::filesystem::path& path, const PhaseGradGrid& grid, TfPoint center,
                     std::size_t half_width, double scale) {
  if (grid.bins() == 0 || grid.frames() == 0) throw InvalidArgument("empty grid");
  auto nearest = [](const std::vector<double>& axis, double v) {
    const auto it = std::min_element(axis.begin(), axis.end(), [v](double a, double b) {
      return std::abs(a - v) < std::abs(b - v);
    });
    return static_cast<std::size_t>(it - axis.begin());
  };
  const std::size_t kc = nearest(grid.freq_axis_hz, center.omega_hz);
  const std::size_t mc = nearest(grid.time_axis_s, center.x_s);
  const std::size_t k0 = kc >= half_width ? kc - half_width : 0;
  const std::size_t m0 = mc >= half_width ? mc - half_width : 0;
  const std::size_t k1 = std::min(grid.bins() - 1, kc + half_width);
  const std::size_t m1 = std::min(grid.frames() - 1, mc + half_width);
  auto out = open_out(path);
  out << "time_s,freq_hz,value\n";
  for (std::size_t k = k0; k <= k1; ++k) {
    for (std::size_t m = m0; m <= m1; ++m) {
      out << format_number(grid.time_axis_s[m]) << ',' << format_number(grid.freq_axis_hz[k])
          << ',';
      if (grid.valid(k, m)) out << format_number(scale * grid.values(k, m));
      out << '\n';
    }
  }
  finish(out, path);
}

void write_histogram_csv(const std::filesystem::path& path, const Histogram& h) {
  auto out = open_out(path);
  out << "bin_left,bin_right,density\n";
  const auto heights = h.heights();
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out << format_number(h.edges[i]) << ',' << format_number(h.edges[i + 1]) << ','
        << format_number(heights[i]) << '\n';
  }
  finish(out, path);
}

nlohmann::json to_json(const ZeroReport& r) {
  const auto& j = r.jacobian;
  nlohmann::json out = {
      {"x_s", r.location.x_s},
      {"omega_hz", r.location.omega_hz},
      {"residual", r.residual_modulus},
      {"jacobian", {{j.ux, j.uomega}, {j.wx, j.womega}}},
      {"det", j.det()},
      {"det_sign", to_string(r.det_sign)},
      {"degeneracy", r.degeneracy},
      {"classified", r.classified},
      {"interior", r.interior},
      {"iterations", r.iterations},
      {"residual_history", series(r.residual_history)},
      {"pattern_pass", r.pattern_pass},
      {"note", r.note},
  };
  out["slopes"] = nullptr;
  out["signs"] = nullptr;
  if (r.vertical_profile) {
    out["slopes"] = {nan_to_null(r.vertical_profile->loglog_slope_below),
                     nan_to_null(r.vertical_profile->loglog_slope_above)};
    out["signs"] = {r.vertical_profile->sign_below, r.vertical_profile->sign_above};
    out["vertical_profile"] = to_json(*r.vertical_profile);
  }
  if (r.omega_profile) out["omega_profile"] = to_json(*r.omega_profile);
  out["c"] = r.horizontal ? nan_to_null(r.horizontal->formula) : nlohmann::json(nullptr);
  out["c_prime"] =
      r.vertical_limit ? nan_to_null(r.vertical_limit->formula) : nlohmann::json(nullptr);
  if (r.horizontal) out["horizontal_limit"] = to_json(*r.horizontal);
  if (r.vertical_limit) out["vertical_limit"] = to_json(*r.vertical_limit);
  return out;
}

nlohmann::json to_json(const ZeroSummary& s) {
  return {{"candidates", s.candidates},
          {"count", s.refined},
          {"failed", s.failed},
          {"classified", s.classified},
          {"classified_interior", s.classified_interior},
          {"pattern_pass", s.pattern_pass},
          {"pass_rate", s.pass_rate},
          {"mean_slope_below", s.mean_slope_below},
          {"mean_slope_above", s.mean_slope_above}};
}

nlohmann::json to_json(const DensityFit& fit, Centering centering) {
  return {{"scale", fit.scale},
          {"ks_distance", fit.ks_distance},
          {"n_samples", fit.n_samples},
          {"centering", to_string(centering)}};
}

void validate_zero_report_json(const nlohmann::json& j) {
  if (!j.is_object()) schema_error("entry is not an object");
  for (const char* key : {"x_s", "omega_hz", "residual", "det", "degeneracy"}) {
    if (!j.contains(key) || !j[key].is_number()) schema_error(std::string(key) + " missing");
  }
  const auto& jac = j.value("jacobian", nlohmann::json());
  if (!jac.is_array() || jac.size() != 2 || !jac[0].is_array() || jac[0].size() != 2 ||
      !jac[1].is_array() || jac[1].size() != 2) {
    schema_error("jacobian must be 2x2");
  }
  if (!j.contains("det_sign") || (j["det_sign"] != "positive" && j["det_sign"] != "negative")) {
    schema_error("det_sign must be positive or negative");
  }
  if (!j.contains("classified") || !j["classified"].is_boolean()) {
    schema_error("classified missing");
  }
  for (const char* key : {"slopes", "signs", "c", "c_prime"}) {
    if (!j.contains(key)) schema_error(std::string(key) + " missing");
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  finish(out, path);
}

std::string read_text(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tfphase
