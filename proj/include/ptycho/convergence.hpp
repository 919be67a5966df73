#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace ptycho {

/// One row per epoch. Metrics are NaN when no ground truth was supplied.
struct ConvergenceRow {
  int epoch = 0;
  double wall_clock_s = 0.0;
  double loss = 0.0;
  double corr_abs = std::numeric_limits<double>::quiet_NaN();
  double corr_amp = std::numeric_limits<double>::quiet_NaN();
  double corr_phase = std::numeric_limits<double>::quiet_NaN();
  double z_m = 0.0;
};

class ConvergenceLog {
 public:
  static constexpr const char* kHeader = "epoch,wall_clock_s,loss,corr_abs,corr_amp,corr_phase,z_m";

  /// Rejects rows whose epoch does not increase or whose clock goes backwards.
  void append(const ConvergenceRow& row);

  const std::vector<ConvergenceRow>& rows() const noexcept { return rows_; }
  bool empty() const noexcept { return rows_.empty(); }
  const ConvergenceRow& back() const { return rows_.back(); }

  /// Last row whose wall clock does not exceed `seconds`, or nullptr.
  const ConvergenceRow* at_time(double seconds) const;
  /// Highest |C| over the run (NaN without metrics).
  double peak_corr() const;

  /// CSV with the exact header above; `prefix` (e.g. "mpie,") is prepended to each data row.
  void write_csv(std::ostream& out, bool with_header = true, const std::string& prefix = {}) const;

 private:
  std::vector<ConvergenceRow> rows_;
};

/// Shortest round-trip decimal form, locale independent ("nan" for NaN).
std::string format_number(double value);

}  // namespace ptycho
