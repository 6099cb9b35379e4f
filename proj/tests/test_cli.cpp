#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "test_util.hpp"
#include "tfphase/export.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Runs the CLI with stdout and stderr sent to files in dir; returns the exit code.
int run(const fs::path& dir, const std::string& args) {
  const std::string cmd = std::string("\"") + TFPHASE_CLI_PATH + "\" " + args + " >\"" +
                          (dir / "stdout.txt").string() + "\" 2>\"" + (dir / "stderr.txt").string() +
                          "\"";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) { return tfphase::read_text(p); }

json load(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string c; std::getline(ss, c, ',');) out.push_back(c);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string l; std::getline(in, l);) rows.push_back(split(l));
  return rows;
}

}  // namespace

TEST_CASE("stft writes grid, image and sidecar deterministically") {
  const auto dir = testutil::scratch("stft");
  const std::string args = "stft --twotone 500,1500 --dur 0.05 --hop 16 --fft 256 --gauss-sigma 0.002 "
                           "--validate-outputs --out ";
  REQUIRE(run(dir, args + (dir / "a").string()) == 0);
  REQUIRE(run(dir, args + (dir / "b").string()) == 0);
  for (const char* ext : {".csv", ".pgm"}) {
    CHECK(slurp(dir / (std::string("a") + ext)) == slurp(dir / (std::string("b") + ext)));
  }
  const json side = load(dir / "a.json");
  CHECK(side["command"] == "stft");
  CHECK(side["grid"]["bins"] == 256);
  CHECK(side["grid"]["hop_samples"] == 16);
  CHECK(side["config"]["gauss-sigma"] == 0.002);
  CHECK(side["outputs"].size() == 2);
  CHECK(tfphase::validate_grid_csv(dir / "a.csv", true).columns == side["grid"]["frames"]);
  CHECK(slurp(dir / "stdout.txt").find((dir / "b.csv").string()) != std::string::npos);
}

TEST_CASE("unsupported and invalid requests exit with code 1") {
  const auto dir = testutil::scratch("usage");
  CHECK(run(dir, "stft --tone 100 --window rect --variant neg_Dg --out " + (dir / "r").string()) == 1);
  CHECK(slurp(dir / "stderr.txt").find("unsupported") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "r.csv"));
  CHECK(run(dir, "stft --tone 100 --gauss-sigma -1 --out " + (dir / "x").string()) == 1);
  CHECK(run(dir, "stft --tone 100 --noise --out " + (dir / "x").string()) == 1);
  CHECK(run(dir, "stft --tone 100") == 1);  // --out is required
  CHECK(run(dir, "frobnicate") == 1);
  CHECK(run(dir, "phasegrad --tone 100 --method magic --out " + (dir / "x").string()) == 1);
}

TEST_CASE("i/o failures exit with code 2") {
  const auto dir = testutil::scratch("io");
  CHECK(run(dir, "stft --input " + (dir / "none.wav").string() + " --format wav --out " +
                     (dir / "x").string()) == 2);
  CHECK(slurp(dir / "stderr.txt").find("i/o") != std::string::npos);
  tfphase::write_text(dir / "file", "x");
  CHECK(run(dir, "stft --tone 100 --dur 0.05 --out " + (dir / "file" / "x").string()) == 2);
  CHECK(run(dir, "--config " + (dir / "none.json").string() + " stft --tone 100 --out " +
                     (dir / "x").string()) == 2);
}

TEST_CASE("config file precedence") {
  const auto dir = testutil::scratch("config");
  tfphase::write_text(dir / "c.json", R"({"hop": 4, "fft": 512, "dur": 0.05, "tone": 300})");
  REQUIRE(run(dir, "--config " + (dir / "c.json").string() + " stft --out " + (dir / "a").string()) == 0);
  json side = load(dir / "a.json");
  CHECK(side["grid"]["hop_samples"] == 4);
  CHECK(side["grid"]["fft_size"] == 512);
  REQUIRE(run(dir, "--config " + (dir / "c.json").string() + " stft --hop 8 --out " +
                       (dir / "b").string()) == 0);
  side = load(dir / "b.json");
  CHECK(side["grid"]["hop_samples"] == 8);
  CHECK(side["grid"]["fft_size"] == 512);

  tfphase::write_text(dir / "bad.json", R"({"hopp": 4})");
  CHECK(run(dir, "--config " + (dir / "bad.json").string() + " stft --tone 1 --out " +
                     (dir / "c").string()) == 1);
  tfphase::write_text(dir / "broken.json", "{hop: ");
  CHECK(run(dir, "--config " + (dir / "broken.json").string() + " stft --tone 1 --out " +
                     (dir / "c").string()) == 1);
}

TEST_CASE("phase derivative patch straddles the mean frequency") {
  const auto dir = testutil::scratch("patch");
  REQUIRE(run(dir, "phasegrad --twotone 500,1500 --dur 0.1 --gauss-sigma 0.001 --hop 1 --fft 1024 "
                   "--convention W --hz --patch 0.0505,1000 --patch-half-width 6 --validate-outputs "
                   "--out " + (dir / "p").string()) == 0);
  const auto rows = csv_rows(dir / "p_patch.csv");
  REQUIRE(rows.size() == 1 + 13 * 13);
  double vmax = -INFINITY, vmin = INFINITY, fmax = 0, fmin = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 3 || rows[i][2].empty()) continue;
    const double w = std::stod(rows[i][1]), v = std::stod(rows[i][2]);
    if (v > vmax) vmax = v, fmax = w;
    if (v < vmin) vmin = v, fmin = w;
  }
  // In Hz the far field is near the tone frequencies; at the zero it diverges
  // with opposite signs on the two sides of 1000 Hz.
  CHECK(vmax > 1500);
  CHECK(vmin < 500);
  CHECK((fmax - 1000) * (fmin - 1000) < 0);
}

TEST_CASE("masked cells are empty in the csv and white in the image") {
  const auto dir = testutil::scratch("mask");
  REQUIRE(run(dir, "phasegrad --twotone 500,1500 --dur 0.05 --gauss-sigma 0.002 --hop 8 --fft 256 "
                   "--threshold 1e-2 --out " + (dir / "p").string()) == 0);
  std::size_t empty = 0;
  const auto rows = csv_rows(dir / "p.csv");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    for (std::size_t c = 1; c < rows[r].size(); ++c) empty += rows[r][c].empty();
  }
  std::ifstream in(dir / "p.pgm");
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0, white = 0;
  in >> magic >> w >> h >> maxval;
  for (std::size_t i = 0; i < w * h; ++i) {
    unsigned v = 0;
    in >> v;
    white += v == 65535;
  }
  CHECK(empty > 0);
  CHECK(white == empty);
}

TEST_CASE("unwrap and ratio routes agree through the cli") {
  const auto dir = testutil::scratch("unwrap");
  const std::string common = "phasegrad --noise --seed 3 --dur 0.2 --gauss-sigma 0.005 --hop 4 --fft 1024 --no-pgm ";
  REQUIRE(run(dir, common + "--method ratio --out " + (dir / "r").string()) == 0);
  REQUIRE(run(dir, common + "--method unwrap --out " + (dir / "u").string()) == 0);
  const auto r = csv_rows(dir / "r.csv");
  const auto u = csv_rows(dir / "u.csv");
  REQUIRE(r.size() == u.size());
  const double bound = 0.01 * M_PI / (4.0 / 8000);
  std::size_t cells = 0, both = 0, bad = 0;
  for (std::size_t i = 1; i < r.size(); ++i) {
    REQUIRE(r[i].size() == u[i].size());
    for (std::size_t j = 1; j < r[i].size(); ++j) {
      ++cells;
      if (r[i][j].empty() || u[i][j].empty()) continue;
      ++both;
      bad += std::abs(std::stod(r[i][j]) - std::stod(u[i][j])) > bound;
    }
  }
  CHECK(both > cells / 2);
  CHECK(bad == 0);
  CHECK(load(dir / "u.json")["config"]["method"] == "unwrap");
}

TEST_CASE("zeros of the two-tone signal lie on the lattice") {
  const auto dir = testutil::scratch("zeros2");
  REQUIRE(run(dir, "zeros --twotone 500,1500 --dur 0.1 --gauss-sigma 0.001 --hop 2 --fft 1024 "
                   "--validate-outputs --out " + (dir / "z").string()) == 0);
  const json zs = load(dir / "z_zeros.json");
  REQUIRE(zs.size() >= 80);
  for (const auto& z : zs) {
    CHECK(std::abs(z["lattice_residual"]["dx_s"].get<double>()) < 1e-9);
    CHECK(std::abs(z["lattice_residual"]["domega_hz"].get<double>()) < 1e-6);
  }
  const json s = load(dir / "z.json")["summary"];
  CHECK(s["pass_rate"] == 1.0);
  CHECK(s["classified_interior"].get<int>() >= 80);
  const auto rows = csv_rows(dir / "z_summary.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].size() == 9);
  CHECK(std::stod(rows[1][6]) == 1.0);
}

TEST_CASE("zeros of a pure tone and of noise") {
  const auto dir = testutil::scratch("zeros");
  REQUIRE(run(dir, "zeros --tone 1000 --dur 0.1 --gauss-sigma 0.001 --hop 2 --fft 256 --out " +
                   (dir / "t").string()) == 0);
  CHECK(load(dir / "t_zeros.json").empty());
  CHECK(load(dir / "t.json")["summary"]["pass_rate"] == 1.0);

  REQUIRE(run(dir, "zeros --noise --seed 4 --dur 0.25 --gauss-sigma 0.001 --hop 2 --fft 256 --out " +
                   (dir / "n").string()) == 0);
  const json s = load(dir / "n.json")["summary"];
  CHECK(s["classified_interior"].get<int>() > 100);
  CHECK(s["pass_rate"].get<double>() >= 0.95);
}

TEST_CASE("noise histogram") {
  const auto dir = testutil::scratch("hist");
  const std::string args = "noisehist --runs 1 --dur 0.5 --seed 2 --bins 100 --validate-outputs --out ";
  REQUIRE(run(dir, args + (dir / "a").string()) == 0);
  REQUIRE(run(dir, args + (dir / "b").string()) == 0);
  CHECK(slurp(dir / "a_hist.csv") == slurp(dir / "b_hist.csv"));
  const json fit = load(dir / "a.json")["fit"];
  CHECK(fit["ks_distance"].get<double>() < 0.01);
  CHECK(fit["scale"].get<double>() ==
        doctest::Approx(fit["reference_scale"].get<double>()).epsilon(0.03));
  CHECK(fit["runs"] == 1);

  // The tallest bin is one of the two around zero.
  const auto rows = csv_rows(dir / "a_hist.csv");
  REQUIRE(rows.size() == 101);
  std::size_t peak = 1;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (std::stod(rows[i][2]) > std::stod(rows[peak][2])) peak = i;
  }
  CHECK(std::stod(rows[peak][0]) <= 0.0);
  CHECK(std::stod(rows[peak][1]) >= 0.0 - 1e-9 * std::abs(std::stod(rows[peak][0])));
  CHECK(std::abs(peak - 50.5) <= 1.0);
}

TEST_CASE("two-tone oracle command") {
  const auto dir = testutil::scratch("oracle");
  REQUIRE(run(dir, "twotone-oracle --twotone 500,1500 --gauss-sigma 0.001 --dur 0.01 --hop 8 --fft 256 "
                   "--validate-outputs --out " + (dir / "o").string()) == 0);
  const auto zeros = csv_rows(dir / "o_zeros.csv");
  REQUIRE(zeros.size() == 1 + 9);  // 0.5, ..., 8.5 ms; the last sample is at 9.875 ms
  CHECK(zeros[0] == std::vector<std::string>{"x_s", "omega_hz"});
  CHECK(std::stod(zeros[1][0]) == doctest::Approx(0.0005));
  CHECK(std::stod(zeros[1][1]) == 1000.0);
  CHECK(tfphase::validate_grid_csv(dir / "o_stft.csv", true).rows == 256);
  CHECK(tfphase::validate_grid_csv(dir / "o_dphase.csv", false).columns == 10);  // frames 0, 8, ..., 72
}
