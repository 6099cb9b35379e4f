#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <string>

#include "tfphase/common.hpp"

namespace testutil {

// Fresh scratch directory per test binary, under the build tree.
inline std::filesystem::path scratch(const std::string& sub) {
  const std::filesystem::path p = std::filesystem::path(TFPHASE_TEST_TMP) / sub;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline double rel_err(tfphase::cplx a, tfphase::cplx b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

inline double rel_err(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

}  // namespace testutil
