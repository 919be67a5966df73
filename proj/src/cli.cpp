#include "ptycho/cli.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "ptycho/bench.hpp"
#include "ptycho/config.hpp"
#include "ptycho/error.hpp"
#include "ptycho/ptyd.hpp"
#include "ptycho/render.hpp"

namespace ptycho {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const ComplexField& find_field(const PtydFile& file, std::initializer_list<const char*> names,
                               const std::string& path) {
  for (const char* name : names) {
    if (auto it = file.fields.find(name); it != file.fields.end()) return it->second;
  }
  throw Error(ErrorKind::ManifestMismatch, fmt::format("{} holds no {} array", path, *names.begin()));
}

const ComplexField* maybe_field(const PtydFile& file, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    if (auto it = file.fields.find(name); it != file.fields.end()) return &it->second;
  }
  return nullptr;
}

void write_text_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

FrameDtype parse_dtype(const std::string& name) {
  if (name == "f32") return FrameDtype::F32;
  if (name == "f64") return FrameDtype::F64;
  throw UsageError("--frame-dtype must be f32 or f64");
}

// Loaded dataset (normalized) plus optional calibrated probe and truth reference.
struct Inputs {
  PtychoDataset dataset;
  std::optional<ComplexField> known_probe;
  std::optional<TruthReference> truth;
};

Inputs load_inputs(const std::string& data_path, const std::string& probe_path, const std::string& truth_path) {
  Inputs in;
  in.dataset = read_dataset(data_path);
  if (!in.dataset.normalized) {
    normalize(in.dataset);
    in.dataset.normalized = true;
  }
  if (!probe_path.empty()) {
    const PtydFile f = read_ptyd(probe_path);
    in.known_probe = find_field(f, {"probe", "truth_probe"}, probe_path);
  }
  if (!truth_path.empty()) {
    const PtydFile f = read_ptyd(truth_path);
    const ComplexField& object = find_field(f, {"truth_object", "object"}, truth_path);
    const ComplexField* probe = maybe_field(f, {"truth_probe", "probe"});
    const ComplexField mask_probe = probe ? *probe : initial_state(in.dataset, in.known_probe).probe;
    if (object.rows() != in.dataset.object_rows || object.cols() != in.dataset.object_cols) {
      throw Error(ErrorKind::ShapeMismatch, "truth object does not match the dataset's object shape");
    }
    in.truth = TruthReference::from(object, mask_probe, in.dataset.positions);
  }
  return in;
}

int cmd_simulate(const std::string& preset_name, const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out_path, const std::string& truth_out, const std::string& dtype,
                 const std::string& propagator, bool noiseless, std::ostream& out) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = load_run_config(config_path);
  if (!preset_name.empty()) {
    if (preset_name == "full") {
      cfg.preset = SimulationPreset::full();
    } else if (preset_name == "desk") {
      cfg.preset = SimulationPreset::desk();
    } else {
      throw UsageError("--preset must be full or desk");
    }
  }
  if (!propagator.empty()) {
    if (propagator == "angular_spectrum") {
      cfg.preset.propagator = PropagatorKind::AngularSpectrum;
    } else if (propagator == "fraunhofer") {
      cfg.preset.propagator = PropagatorKind::Fraunhofer;
    } else {
      throw UsageError("--propagator must be angular_spectrum or fraunhofer");
    }
  }
  if (noiseless) cfg.preset.noise = NoiseSpec::noiseless(cfg.preset.noise.photon_scale);
  if (seed) cfg.seed = *seed;

  Simulation sim = simulate_preset(cfg.preset, cfg.seed);
  PtydFile file;
  file.dataset = sim.dataset;
  file.frame_dtype = parse_dtype(dtype);
  file.fields.emplace("truth_object", sim.truth_object);
  file.fields.emplace("truth_probe", sim.truth_probe);
  write_ptyd(out_path, file);
  if (!truth_out.empty()) {
    PtydFile truth;
    truth.dataset = sim.dataset;
    truth.dataset.frames.clear();
    truth.has_frames = false;
    truth.fields = file.fields;
    write_ptyd(truth_out, truth);
  }
  out << fmt::format("wrote {} ({} positions, {}x{} frames)\n", out_path, sim.dataset.positions.size(),
                     cfg.preset.frame_size, cfg.preset.frame_size);
  return kExitOk;
}

struct ReconstructArgs {
  std::string data, solver = "mpie", probe, truth, config, out, log;
  std::optional<double> lr, z_init, time_budget;
  int epochs = 100;
  bool train_z = false;
  bool fix_probe = false;
  bool keep_best = false;
  std::optional<std::uint64_t> seed;
};

int cmd_reconstruct(const ReconstructArgs& a, std::ostream& out) {
  RunConfig cfg;
  if (!a.config.empty()) cfg = load_run_config(a.config);
  Inputs in = load_inputs(a.data, a.probe, a.truth);
  const SolverSpec solver = parse_solver_spec(a.solver, a.lr.value_or(cfg.adam.lr_object));
  if (a.lr && solver.kind != SolverKind::Adam) throw UsageError("--lr applies to the adam solver only");
  if (a.train_z && solver.kind != SolverKind::Adam) throw UsageError("--train-z needs the adam solver");
  if (a.seed) {
    cfg.pie.seed = *a.seed;
    cfg.adam.seed = *a.seed;
  }
  if (a.train_z) cfg.adam.train_z = true;
  if (a.fix_probe) {
    cfg.adam.train_probe = false;
    cfg.pie.probe_update_enabled = false;
  }
  if (cfg.adam.train_z && in.dataset.geometry.propagator != PropagatorKind::AngularSpectrum) {
    throw Error(ErrorKind::Unsupported,
                "--train-z needs the angular spectrum model; the Fraunhofer map has no z dependence");
  }

  ReconstructionState init = initial_state(in.dataset, in.known_probe);
  if (a.z_init) init.z_estimate = *a.z_init;
  RunLimits limits;
  limits.max_epochs = a.epochs;
  if (a.time_budget) limits.time_budget_s = *a.time_budget;
  limits.keep_best = a.keep_best;
  const TruthReference* truth = in.truth ? &*in.truth : nullptr;
  if (a.keep_best && !truth) throw UsageError("--keep-best needs --truth");

  SolverResult result = run_solver(solver, in.dataset, std::move(init), cfg.pie, cfg.adam, limits, truth);

  PtydFile state;
  state.dataset = in.dataset;
  state.dataset.frames.clear();
  state.has_frames = false;
  state.fields.emplace("object", result.state.object);
  state.fields.emplace("probe", result.state.probe);
  state.z_estimate = result.state.z_estimate;
  state.epoch = result.state.epoch;
  write_ptyd(a.out, state);
  if (!a.log.empty()) {
    std::ostringstream csv;
    result.log.write_csv(csv);
    write_text_atomic(a.log, csv.str());
  }
  const ConvergenceRow& last = result.log.back();
  out << fmt::format("{}: {} epochs, {:.3f} s, loss {}", solver.label, last.epoch, last.wall_clock_s,
                     format_number(last.loss));
  if (truth) out << fmt::format(", |C| {:.4f}", last.corr_abs);
  if (cfg.adam.train_z) out << fmt::format(", z {:.6f} m", result.state.z_estimate);
  out << '\n';
  return kExitOk;
}

int cmd_benchmark(const std::string& data, const std::string& truth_path, const std::string& solvers,
                  double budget, int max_epochs, const std::string& config, const std::string& out_path,
                  std::ostream& out) {
  RunConfig cfg;
  if (!config.empty()) cfg = load_run_config(config);
  Inputs in = load_inputs(data, "", truth_path);
  const std::vector<SolverSpec> list = parse_solver_list(solvers, cfg.adam.lr_object);
  RunLimits limits;
  limits.time_budget_s = budget;
  limits.max_epochs = max_epochs;
  const std::vector<BenchmarkRun> runs =
      run_benchmark(in.dataset, initial_state(in.dataset), list, cfg.pie, cfg.adam, limits, *in.truth);
  std::ostringstream csv;
  write_benchmark_csv(csv, runs);
  write_text_atomic(out_path, csv.str());
  for (const auto& run : runs) {
    if (run.diverged) {
      out << fmt::format("{}: diverged\n", run.solver.label);
    } else if (!run.log.empty()) {
      out << fmt::format("{}: {} epochs, final |C| {:.4f}, peak |C| {:.4f}\n", run.solver.label,
                         run.log.back().epoch, run.log.back().corr_abs, run.log.peak_corr());
    }
  }
  return kExitOk;
}

int cmd_render(const std::string& in_path, const std::string& what, const std::string& out_path) {
  const auto dash = what.find('-');
  if (dash == std::string::npos) throw UsageError("--what must look like object-amplitude or probe-wheel");
  const std::string target = what.substr(0, dash);
  const std::string mode_name = what.substr(dash + 1);
  RenderMode mode;
  if (mode_name == "amplitude") {
    mode = RenderMode::Amplitude;
  } else if (mode_name == "phase") {
    mode = RenderMode::Phase;
  } else if (mode_name == "wheel") {
    mode = RenderMode::ComplexWheel;
  } else {
    throw UsageError("render mode must be amplitude, phase or wheel");
  }
  if (target != "object" && target != "probe") throw UsageError("--what must start with object- or probe-");
  const PtydFile file = read_ptyd(in_path);
  const ComplexField& field = target == "object" ? find_field(file, {"object", "truth_object"}, in_path)
                                                 : find_field(file, {"probe", "truth_probe"}, in_path);
  write_png(out_path, render_field(field, mode));
  return kExitOk;
}

int cmd_info(const std::string& in_path, std::ostream& out) {
  const std::vector<std::uint8_t> bytes = read_file(in_path);
  parse_ptyd(bytes);  // full validation before printing
  out << nlohmann::ordered_json::parse(ptyd_header_text(bytes)).dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ptychographic simulation and reconstruction", "ptycho"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string preset, config, out_path, truth_out, dtype = "f32", propagator;
  std::optional<std::uint64_t> seed;
  bool noiseless = false;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset with ground truth");
  sim->add_option("--preset", preset, "full or desk");
  sim->add_option("--config", config, "JSON run configuration");
  sim->add_option("--out", out_path, "Output dataset (.ptyd)")->required();
  sim->add_option("--seed", seed, "Seed for phantom, trajectory and noise");
  sim->add_option("--truth-out", truth_out, "Also write the ground truth to this file");
  sim->add_option("--frame-dtype", dtype, "f32 (default) or f64");
  sim->add_option("--propagator", propagator, "angular_spectrum or fraunhofer");
  sim->add_flag("--noiseless", noiseless, "Skip shot noise, read noise and quantization");

  ReconstructArgs ra;
  auto* rec = app.add_subcommand("reconstruct", "Run one solver on a dataset");
  rec->add_option("--data", ra.data, "Input dataset")->required();
  rec->add_option("--solver", ra.solver, "epie, mpie or adam");
  rec->add_option("--lr", ra.lr, "Adam learning rate for object and probe");
  rec->add_option("--epochs", ra.epochs, "Maximum number of epochs");
  rec->add_option("--time-budget", ra.time_budget, "Stop after this many seconds of solver time");
  rec->add_flag("--train-z", ra.train_z, "Also optimize the propagation distance (adam)");
  rec->add_option("--z-init", ra.z_init, "Initial distance estimate in meters");
  rec->add_option("--probe", ra.probe, "File holding a calibrated probe");
  rec->add_flag("--fix-probe", ra.fix_probe, "Keep the probe fixed");
  rec->add_option("--truth", ra.truth, "File holding the ground-truth object for logging |C|");
  rec->add_flag("--keep-best", ra.keep_best, "Return the state with the best |C| (needs --truth)");
  rec->add_option("--seed", ra.seed, "Seed for position order");
  rec->add_option("--config", ra.config, "JSON run configuration");
  rec->add_option("--out", ra.out, "Output state (.ptyd)")->required();
  rec->add_option("--log", ra.log, "Convergence log (.csv)");

  std::string bench_data, bench_truth, bench_solvers = "mpie,adam:0.01,adam:0.04", bench_config, bench_out;
  double budget = 120.0;
  int bench_epochs = 1000000;
  auto* bench = app.add_subcommand("benchmark", "Compare solvers under a wall-clock budget");
  bench->add_option("--data", bench_data, "Input dataset")->required();
  bench->add_option("--truth", bench_truth, "File holding the ground-truth object")->required();
  bench->add_option("--solvers", bench_solvers, "Comma-separated list, e.g. mpie,adam:0.01,adam:0.04");
  bench->add_option("--budget-seconds", budget, "Solver time per run")->check(CLI::PositiveNumber);
  bench->add_option("--max-epochs", bench_epochs, "Epoch cap per run");
  bench->add_option("--config", bench_config, "JSON run configuration");
  bench->add_option("--out", bench_out, "Output CSV")->required();

  std::string render_in, render_what, render_out;
  auto* render = app.add_subcommand("render", "Write a PNG of an object or probe");
  render->add_option("--in", render_in, "State or dataset file")->required();
  render->add_option("--what", render_what, "object-amplitude, object-phase, probe-wheel, ...")->required();
  render->add_option("--out", render_out, "Output PNG")->required();

  std::string info_in;
  auto* info = app.add_subcommand("info", "Print a file's header");
  info->add_option("--in", info_in, "PTYD file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*sim) return cmd_simulate(preset, config, seed, out_path, truth_out, dtype, propagator, noiseless, out);
    if (*rec) return cmd_reconstruct(ra, out);
    if (*bench) return cmd_benchmark(bench_data, bench_truth, bench_solvers, budget, bench_epochs, bench_config,
                                     bench_out, out);
    if (*render) return cmd_render(render_in, render_what, render_out);
    if (*info) return cmd_info(info_in, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return e.kind() == ErrorKind::Divergence ? kExitDivergence : kExitDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
  return kExitUsage;
}

}  // namespace ptycho
