#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "test_util.hpp"
#include "tfphase/error.hpp"
#include "tfphase/export.hpp"
#include "tfphase/oracle.hpp"
#include "tfphase/signal.hpp"

using namespace tfphase;

namespace {

GridParams grid_params(std::size_t hop, std::size_t fft) {
  GridParams gp;
  gp.hop_samples = hop;
  gp.fft_size = fft;
  return gp;
}

std::vector<std::string> lines_of(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

IoError::Reason reason_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const IoError& e) {
    return e.reason();
  }
  FAIL("no IoError thrown");
  return IoError::Reason::write_failed;
}

}  // namespace

TEST_CASE("number formatting round-trips") {
  for (const double v : {0.0, -0.0, 1.0, 0.1, -123.456e-7, 1e300, 4.9e-324, M_PI}) {
    CHECK(std::strtod(format_number(v).c_str(), nullptr) == v);
  }
  CHECK(format_complex({1, 2}) == "1+2j");
  CHECK(format_complex({1, -2}) == "1-2j");
  CHECK(format_complex({-0.5, -0.0}) == "-0.5-0j");
  CHECK(format_number(0.1) == "0.10000000000000001");
}

TEST_CASE("grid csv round trip") {
  const auto dir = testutil::scratch("grid");
  const SignalBuffer f = make_two_tone(500, 1500, 8000, 0.03);
  const StftGrid g = stft_grid(f, WindowSpec::gaussian(0.002), WindowVariant::g, grid_params(16, 256),
                               Convention::W_time_invariant);
  write_grid_csv(dir / "g.csv", g);
  const GridCsvInfo info = validate_grid_csv(dir / "g.csv", true);
  CHECK(info.rows == g.bins());
  CHECK(info.columns == g.frames());
  CHECK(info.empty_cells == 0);
  const ParsedGrid back = read_grid_csv(dir / "g.csv");
  CHECK(back.time_axis_s == g.time_axis_s);
  CHECK(back.freq_axis_hz == g.freq_axis_hz);
  CHECK(back.cells.storage() == g.coeffs.storage());
  CHECK(lines_of(dir / "g.csv").front().rfind("freq_hz/time_s,", 0) == 0);
}

TEST_CASE("phase derivative csv leaves masked cells empty") {
  const auto dir = testutil::scratch("pg");
  const SignalBuffer f = make_pure_tone(1000, 8000, 0.03);
  const DerivativeStfts d = derivative_stfts(f, WindowSpec::gaussian(0.002), grid_params(16, 256));
  const PhaseGradGrid p = phase_deriv_ratio(d.v, d.vx, PhaseDirection::d_dx, 1e-3);
  write_phasegrad_csv(dir / "p.csv", p, 1 / (2 * M_PI));
  const GridCsvInfo info = validate_grid_csv(dir / "p.csv", false);
  CHECK(info.empty_cells == p.values.size() - p.valid_count());
  CHECK(info.empty_cells > 0);
  CHECK_THROWS_AS(validate_grid_csv(dir / "p.csv", true), IoError);
}

TEST_CASE("malformed grid csv") {
  const auto dir = testutil::scratch("bad");
  {
    std::ofstream(dir / "nohdr.csv") << "0,1+0j\n";
    std::ofstream(dir / "cell.csv") << "freq_hz/time_s,0,1\n0,1+0j,2+0j\n10,oops,1+1j\n";
    std::ofstream(dir / "ragged.csv") << "freq_hz/time_s,0,1\n0,1+0j\n";
    std::ofstream(dir / "empty.csv") << "";
  }
  CHECK(reason_of([&] { validate_grid_csv(dir / "nohdr.csv", true); }) == IoError::Reason::malformed_header);
  CHECK(reason_of([&] { validate_grid_csv(dir / "empty.csv", true); }) == IoError::Reason::malformed_header);
  CHECK(reason_of([&] { validate_grid_csv(dir / "ragged.csv", true); }) == IoError::Reason::unparsable_line);
  try {
    validate_grid_csv(dir / "cell.csv", true);
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(e.reason() == IoError::Reason::unparsable_line);
    CHECK(e.line() == 3);
  }
  CHECK(reason_of([&] { validate_grid_csv(dir / "missing.csv", true); }) == IoError::Reason::missing_file);
}

TEST_CASE("pgm orientation, levels and mask") {
  const auto dir = testutil::scratch("pgm");
  Grid2D<double> v(2, 3);
  v(0, 0) = 0.0, v(0, 1) = 0.5, v(0, 2) = 1.0;   // lowest frequency
  v(1, 0) = -7.0, v(1, 1) = 9.0, v(1, 2) = 0.25;  // highest frequency
  Grid2D<std::uint8_t> mask(2, 3, 1);
  mask(0, 1) = 0;
  write_pgm(dir / "a.pgm", v, &mask, {0.0, 1.0});
  const auto l = lines_of(dir / "a.pgm");
  REQUIRE(l.size() == 5);
  CHECK(l[0] == "P2");
  CHECK(l[1] == "3 2");
  CHECK(l[2] == "65535");
  CHECK(l[3] == "0 65534 16384");   // top row: highest frequency, clipped
  CHECK(l[4] == "0 65535 65534");   // masked cell is white
  const PgmInfo info = validate_pgm(dir / "a.pgm");
  CHECK(info.width == 3);
  CHECK(info.height == 2);
  CHECK(info.maxval == 65535);

  write_pgm(dir / "b.pgm", v, &mask, {0.0, 1.0}, true);
  CHECK(std::filesystem::file_size(dir / "b.pgm") == std::string("P5\n3 2\n65535\n").size() + 12);
  CHECK(validate_pgm(dir / "b.pgm").width == 3);
  std::filesystem::resize_file(dir / "b.pgm", std::filesystem::file_size(dir / "b.pgm") - 1);
  CHECK_THROWS_AS(validate_pgm(dir / "b.pgm"), IoError);

  CHECK_THROWS_AS(write_pgm(dir / "c.pgm", v, nullptr, {1.0, 1.0}), InvalidArgument);
  Grid2D<std::uint8_t> wrong(3, 3, 1);
  CHECK_THROWS_AS(write_pgm(dir / "c.pgm", v, &wrong, {0.0, 1.0}), InvalidArgument);
  {
    std::ofstream(dir / "bad.pgm") << "P2\n2 2\n65535\n1 2 3\n";
  }
  CHECK(reason_of([&] { validate_pgm(dir / "bad.pgm"); }) == IoError::Reason::unparsable_line);
}

TEST_CASE("robust range") {
  Grid2D<double> v(1, 9);
  for (std::size_t i = 0; i < 9; ++i) v(0, i) = static_cast<double>(i);
  v(0, 8) = 1e9;  // an outlier moves neither the median nor the IQR much
  const ValueRange r = robust_range(v, nullptr);
  CHECK(r.vmin == doctest::Approx(4 - 3 * 4));
  CHECK(r.vmax == doctest::Approx(4 + 3 * 4));
  Grid2D<double> c(2, 2, 3.0);
  const ValueRange rc = robust_range(c, nullptr);
  CHECK(rc.vmin == 2.5);
  CHECK(rc.vmax == 3.5);
  Grid2D<std::uint8_t> none(2, 2, 0);
  CHECK(robust_range(c, &none).vmax > robust_range(c, &none).vmin);
}

TEST_CASE("modulus in dB") {
  StftGrid g;
  g.coeffs = Grid2D<cplx>(1, 3);
  g.coeffs(0, 0) = {3, 4};
  g.coeffs(0, 1) = {0.5, 0};
  g.coeffs(0, 2) = {0, 0};
  const auto db = modulus_db(g);
  CHECK(db(0, 0) == 0.0);
  CHECK(db(0, 1) == doctest::Approx(-20.0));
  CHECK(db(0, 2) == -120.0);
}

TEST_CASE("patch csv") {
  const auto dir = testutil::scratch("patch");
  const SignalBuffer f = make_pure_tone(1000, 8000, 0.05);
  const DerivativeStfts d = derivative_stfts(f, WindowSpec::gaussian(0.002), grid_params(16, 256));
  const PhaseGradGrid p = phase_deriv_ratio(d.v, d.vx, PhaseDirection::d_dx);
  write_patch_csv(dir / "p.csv", p, {0.025, 1000}, 3);
  auto l = lines_of(dir / "p.csv");
  CHECK(l.front() == "time_s,freq_hz,value");
  CHECK(l.size() == 1 + 7 * 7);
  // Clipped at the grid corner.
  write_patch_csv(dir / "q.csv", p, {-1.0, 0.0}, 3);
  l = lines_of(dir / "q.csv");
  CHECK(l.size() == 1 + 4 * 4);
}

TEST_CASE("histogram csv") {
  const auto dir = testutil::scratch("hist");
  const Histogram h = make_histogram({0.1, 0.2, 0.7}, 2, 0.0, 1.0, HistogramNormalization::density);
  write_histogram_csv(dir / "h.csv", h);
  const auto l = lines_of(dir / "h.csv");
  REQUIRE(l.size() == 3);
  CHECK(l[0] == "bin_left,bin_right,density");
  CHECK(l[1] == "0,0.5,1.3333333333333333");
  CHECK(l[2] == "0.5,1,0.66666666666666663");
}

TEST_CASE("zero report json schema") {
  const SignalBuffer f = make_two_tone(500, 1500, 8000, 0.1);
  const auto spec = WindowSpec::gaussian(0.001);
  AnalyzeOptions o;
  o.refine.reference_modulus = oracle::gaussian_window_mass(0.001);
  const ZeroReport r = analyze_zero(f, spec, {0.0505, 1003}, o, 2.0, 1e-4);
  const nlohmann::json j = to_json(r);
  CHECK_NOTHROW(validate_zero_report_json(j));
  CHECK(j["det_sign"].is_string());
  CHECK(j["jacobian"].size() == 2);
  CHECK(j["slopes"].size() == 2);
  CHECK(j["c"].is_number());
  // Round trip through text.
  CHECK_NOTHROW(validate_zero_report_json(nlohmann::json::parse(j.dump())));

  nlohmann::json missing = j;
  missing.erase("det");
  CHECK_THROWS_AS(validate_zero_report_json(missing), IoError);
  nlohmann::json wrong = j;
  wrong["x_s"] = "early";
  CHECK_THROWS_AS(validate_zero_report_json(wrong), IoError);

  ZeroSummary s;
  s.candidates = 3;
  s.pass_rate = 0.5;
  const nlohmann::json js = to_json(s);
  CHECK(js["candidates"] == 3);
  CHECK(js["pass_rate"] == 0.5);

  DensityFit fit;
  fit.scale = 2.0;
  const nlohmann::json jf = to_json(fit, Centering::none);
  CHECK(jf["scale"] == 2.0);
  CHECK(jf["centering"] == "none");
}

TEST_CASE("text helpers") {
  const auto dir = testutil::scratch("text");
  write_text(dir / "a.txt", "hello\n");
  CHECK(read_text(dir / "a.txt") == "hello\n");
  CHECK(reason_of([&] { read_text(dir / "nope.txt"); }) == IoError::Reason::missing_file);
  // Parent directories are created, but not through a regular file.
  CHECK(reason_of([&] { write_text(dir / "a.txt" / "b.txt", "x"); }) == IoError::Reason::write_failed);
}
