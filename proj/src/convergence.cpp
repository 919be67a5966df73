#include "ptycho/convergence.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <ostream>

#include "ptycho/error.hpp"

namespace ptycho {

void ConvergenceLog::append(const ConvergenceRow& row) {
  if (!rows_.empty()) {
    if (row.epoch <= rows_.back().epoch) {
      throw Error(ErrorKind::InvalidArgument,
                  fmt::format("log epochs must increase ({} after {})", row.epoch, rows_.back().epoch));
    }
    if (row.wall_clock_s < rows_.back().wall_clock_s) {
      throw Error(ErrorKind::InvalidArgument, "log wall clock went backwards");
    }
  }
  rows_.push_back(row);
}

const ConvergenceRow* ConvergenceLog::at_time(double seconds) const {
  const ConvergenceRow* found = nullptr;
  for (const auto& row : rows_) {
    if (row.wall_clock_s > seconds) break;
    found = &row;
  }
  return found;
}

double ConvergenceLog::peak_corr() const {
  double peak = std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : rows_) {
    if (std::isnan(row.corr_abs)) continue;
    if (std::isnan(peak) || row.corr_abs > peak) peak = row.corr_abs;
  }
  return peak;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  // Shortest form that round-trips; to_chars ignores the locale.
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value, std::chars_format::general);
  return std::string(buffer, result.ptr);
}

void ConvergenceLog::write_csv(std::ostream& out, bool with_header, const std::string& prefix) const {
  if (with_header) out << kHeader << '\n';
  for (const auto& row : rows_) {
    out << prefix << row.epoch << ',' << format_number(row.wall_clock_s) << ',' << format_number(row.loss) << ','
        << format_number(row.corr_abs) << ',' << format_number(row.corr_amp) << ','
        << format_number(row.corr_phase) << ',' << format_number(row.z_m) << '\n';
  }
}

}  // namespace ptycho
