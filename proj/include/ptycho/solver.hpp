#pragma once

#include <chrono>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "ptycho/convergence.hpp"
#include "ptycho/metrics.hpp"
#include "ptycho/model.hpp"

namespace ptycho {

/// Stopping rules shared by every solver loop.
struct RunLimits {
  int max_epochs = 100;
  double time_budget_s = std::numeric_limits<double>::infinity();
  /// Return the state with the best |C| seen instead of the last one (needs a truth reference).
  bool keep_best = false;
};

/// Ground truth used for per-epoch quality logging.
struct TruthReference {
  ComplexField object;
  Mask mask;
  std::size_t crop_margin = 8;

  /// Mask from the probe footprint at every scan position.
  static TruthReference from(const ComplexField& object, const ComplexField& probe,
                             std::span<const ScanPosition> positions);
  CorrelationReport evaluate(const ComplexField& estimate) const;
};

struct SolverResult {
  ReconstructionState state;
  ConvergenceLog log;
};

/// Accumulates solver time only: metric evaluation happens between stop() and start().
class SolverClock {
 public:
  void start() { started_ = std::chrono::steady_clock::now(); }
  void stop() {
    elapsed_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  }
  double elapsed() const { return elapsed_; }

 private:
  std::chrono::steady_clock::time_point started_{};
  double elapsed_ = 0.0;
};

/// Object of ones and a probe guess: the calibrated probe when given,
/// otherwise the simulator's aperture model (diameter a quarter of the frame).
/// Either is scaled so its energy matches the mean frame sum of the dataset.
ReconstructionState initial_state(const PtychoDataset& dataset,
                                  const std::optional<ComplexField>& known_probe = std::nullopt);

/// Appends one log row, evaluating the truth reference when present.
void record_epoch(ConvergenceLog& log, const ReconstructionState& state, double wall_clock_s, double loss,
                  const TruthReference* truth);

}  // namespace ptycho
