#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ptycho/ad_solver.hpp"
#include "ptycho/pie.hpp"

namespace ptycho {

enum class SolverKind { EPie, MPie, Adam };

/// "epie", "mpie" or "adam:<lr>" (plain "adam" uses the configured rate).
struct SolverSpec {
  std::string label;
  SolverKind kind = SolverKind::MPie;
  double lr = 0.0;
};

SolverSpec parse_solver_spec(const std::string& text, double default_lr);
std::vector<SolverSpec> parse_solver_list(const std::string& text, double default_lr);

struct BenchmarkRun {
  SolverSpec solver;
  ConvergenceLog log;
  bool diverged = false;
};

/// Runs each solver from the same initial state under the same limits.
/// A diverging solver is flagged and contributes no rows.
std::vector<BenchmarkRun> run_benchmark(const PtychoDataset& dataset, const ReconstructionState& init,
                                        const std::vector<SolverSpec>& solvers, const PieConfig& pie,
                                        const AdConfig& adam, const RunLimits& limits, const TruthReference& truth);

inline constexpr const char* kBenchmarkHeader = "solver,epoch,wall_clock_s,loss,corr_abs,corr_amp,corr_phase,z_m";

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRun>& runs);

/// Runs one solver and returns its result (shared by the CLI and the benchmark).
SolverResult run_solver(const SolverSpec& solver, const PtychoDataset& dataset, ReconstructionState init,
                        const PieConfig& pie, AdConfig adam, const RunLimits& limits, const TruthReference* truth);

}  // namespace ptycho
