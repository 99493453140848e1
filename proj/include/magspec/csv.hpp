#pragma once

// Deterministic CSV output: header row, comma separator, 17 significant
// digits, LF line endings.

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "bandfun.hpp"
#include "semiclassics.hpp"

namespace magspec::csv {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_row(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    os << cells[i];
  }
  os << '\n';
}

inline void write_band(std::ostream& os, const BandSample& s) {
  write_row(os, {"param", "value", "residual"});
  for (std::size_t i = 0; i < s.parameter.size(); ++i)
    write_row(os, {num(s.parameter[i]), num(s.value[i]), num(s.residual[i])});
}

inline void write_sweep(std::ostream& os, const HSweep& s) {
  write_row(os, {"h", "lambda", "residual"});
  for (std::size_t i = 0; i < s.h.size(); ++i)
    write_row(os, {num(s.h[i]), num(s.lambda[i]), num(s.residual[i])});
}

inline void write_fit(std::ostream& os, const AsymptoticFit& f) {
  write_row(os, {"exponent", "coefficient"});
  for (std::size_t i = 0; i < f.exponents.size(); ++i)
    write_row(os, {num(f.exponents[i]), num(f.coefficients[i])});
}

inline void write_surface(std::ostream& os, const SurfaceMin& s) {
  write_row(os, {"x", "xi", "value"});
  for (const auto& p : s.samples) write_row(os, {num(p.x), num(p.xi), num(p.value)});
}

}  // namespace magspec::csv
