#pragma once

// File formats shared by the CLI and the tests.
//
// Grid CSV: first row "freq_hz/time_s,<t_0>,<t_1>,..."; then one row per
// frequency bin, "<w_k>,<cell>,...". Complex cells are written as "re+imj"
// (Python complex() syntax), real cells as plain numbers, masked cells empty.
// All numbers use %.17g so values round-trip.
//
// PGM: 16-bit grey, P2 (ASCII) or P5 (binary, big-endian). Highest frequency
// on the top row. Values map linearly from [vmin, vmax] to [0, 65534];
// masked cells are 65535 (white).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tfphase/common.hpp"
#include "tfphase/phasegrad.hpp"
#include "tfphase/stats.hpp"
#include "tfphase/stft.hpp"
#include "tfphase/zeros.hpp"

namespace tfphase {

std::string format_number(double v);
std::string format_complex(cplx z);

void write_grid_csv(const std::filesystem::path& path, const StftGrid& grid);

// scale multiplies every value (e.g. 1 / (2 pi) for Hz output).
void write_phasegrad_csv(const std::filesystem::path& path, const PhaseGradGrid& grid,
                         double scale = 1.0);

// Shape and cell syntax of a grid CSV; throws IoError when malformed.
struct GridCsvInfo {
  std::size_t rows = 0;     // frequency bins
  std::size_t columns = 0;  // time frames
  std::size_t empty_cells = 0;
};
GridCsvInfo validate_grid_csv(const std::filesystem::path& path, bool complex_cells);

// Parsed complex grid CSV (empty cells become NaN).
struct ParsedGrid {
  std::vector<double> time_axis_s;
  std::vector<double> freq_axis_hz;
  Grid2D<cplx> cells;
};
ParsedGrid read_grid_csv(const std::filesystem::path& path);

struct ValueRange {
  double vmin = 0.0;
  double vmax = 1.0;
};

// median -+ 3 IQR of the valid cells (a unit range around the median when
// the IQR vanishes).
ValueRange robust_range(const Grid2D<double>& values, const Grid2D<std::uint8_t>* mask);

void write_pgm(const std::filesystem::path& path, const Grid2D<double>& values,
               const Grid2D<std::uint8_t>* mask, ValueRange range, bool binary = false);

// 20 log10(|V| / max|V|) clipped to [-120, 0] dB.
Grid2D<double> modulus_db(const StftGrid& grid);

struct PgmInfo {
  std::size_t width = 0;
  std::size_t height = 0;
  unsigned maxval = 0;
};
PgmInfo validate_pgm(const std::filesystem::path& path);

// Long-format patch "time_s,freq_hz,value" for cells within half_width
// cells of the node nearest to center; masked values are left empty.
void write_patch_csv(const std::filesystem::path& path, const PhaseGradGrid& grid, TfPoint center,
                     std::size_t half_width, double scale = 1.0);

// Histogram CSV "bin_left,bin_right,density".
void write_histogram_csv(const std::filesystem::path& path, const Histogram& h);

nlohmann::json to_json(const ZeroReport& r);
nlohmann::json to_json(const ZeroSummary& s);
nlohmann::json to_json(const DensityFit& fit, Centering centering);

// Checks the keys and types written by to_json(ZeroReport); throws IoError.
void validate_zero_report_json(const nlohmann::json& j);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace tfphase
