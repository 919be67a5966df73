#include "ptycho/bench.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>

#include "ptycho/error.hpp"

namespace ptycho {

SolverSpec parse_solver_spec(const std::string& text, double default_lr) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  SolverSpec spec;
  spec.label = text;
  if (name == "epie") {
    spec.kind = SolverKind::EPie;
  } else if (name == "mpie") {
    spec.kind = SolverKind::MPie;
  } else if (name == "adam") {
    spec.kind = SolverKind::Adam;
    spec.lr = default_lr;
  } else {
    throw Error(ErrorKind::InvalidArgument, fmt::format("unknown solver \"{}\"", name));
  }
  if (colon != std::string::npos) {
    if (spec.kind != SolverKind::Adam) {
      throw Error(ErrorKind::InvalidArgument, fmt::format("solver \"{}\" takes no learning rate", name));
    }
    const std::string rate = text.substr(colon + 1);
    const auto [end, ec] = std::from_chars(rate.data(), rate.data() + rate.size(), spec.lr);
    if (ec != std::errc() || end != rate.data() + rate.size() || !(spec.lr > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, fmt::format("bad learning rate in \"{}\"", text));
    }
  }
  return spec;
}

std::vector<SolverSpec> parse_solver_list(const std::string& text, double default_lr) {
  std::vector<SolverSpec> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(parse_solver_spec(item, default_lr));
  }
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, "no solvers given");
  return out;
}

SolverResult run_solver(const SolverSpec& solver, const PtychoDataset& dataset, ReconstructionState init,
                        const PieConfig& pie, AdConfig adam, const RunLimits& limits, const TruthReference* truth) {
  switch (solver.kind) {
    case SolverKind::EPie:
      return run_pie(dataset, std::move(init), pie, PieVariant::EPie, limits, truth);
    case SolverKind::MPie:
      return run_pie(dataset, std::move(init), pie, PieVariant::MPie, limits, truth);
    case SolverKind::Adam:
      adam.lr_object = solver.lr;
      adam.lr_probe = solver.lr;
      return reconstruct_ad(dataset, std::move(init), adam, limits, truth);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown solver kind");
}

std::vector<BenchmarkRun> run_benchmark(const PtychoDataset& dataset, const ReconstructionState& init,
                                        const std::vector<SolverSpec>& solvers, const PieConfig& pie,
                                        const AdConfig& adam, const RunLimits& limits, const TruthReference& truth) {
  std::vector<BenchmarkRun> runs;
  for (const auto& solver : solvers) {
    BenchmarkRun run{solver, {}, false};
    try {
      run.log = run_solver(solver, dataset, init, pie, adam, limits, &truth).log;
    } catch (const DivergenceError&) {
      run.diverged = true;
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRun>& runs) {
  out << kBenchmarkHeader << '\n';
  for (const auto& run : runs) run.log.write_csv(out, false, run.solver.label + ",");
}

}  // namespace ptycho
