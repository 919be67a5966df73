#include "ptycho/pie.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ptycho/error.hpp"
#include "ptycho/rng.hpp"

namespace ptycho {

namespace {

constexpr double kProjectionFloor = 1e-12;

double max_norm(std::span<const cplx> values) {
  double peak = 0.0;
  for (const auto& v : values) peak = std::max(peak, std::norm(v));
  return peak;
}

// One sweep in seeded order. `reg` mixes the local |.|^2 with its maximum in the
// update denominators; reg = 1 gives the plain ePIE step.
double pie_sweep(ReconstructionState& state, const PtychoDataset& dataset, const PieConfig& config, double reg) {
  const PtychoGeometry& g = dataset.geometry;
  const std::size_t n = g.frame_size;
  if (state.probe.rows() != n || state.probe.cols() != n) {
    throw Error(ErrorKind::ShapeMismatch, "probe does not match the frame size");
  }
  const Propagator propagator = make_propagator(g, state.z_estimate);
  const bool update_probe = config.probe_update_enabled && state.epoch >= config.probe_start_epoch;

  ComplexField& object = state.object;
  ComplexField& probe = state.probe;
  double error = 0.0;
  for (const std::size_t i : sweep_order(dataset.positions.size(), config.seed, state.epoch)) {
    const ScanPosition& pos = dataset.positions[i];
    const RealArray& measured = dataset.frames[i];
    const ComplexField window = extract_window(object, pos, n);

    ComplexField psi = window;
    for (std::size_t k = 0; k < psi.size(); ++k) psi[k] *= probe[k];
    ComplexField detector = psi;
    propagator.forward(detector);
    for (std::size_t k = 0; k < detector.size(); ++k) {
      const double d = std::norm(detector[k]) - measured[k];
      error += d * d;
      const double modulus = std::abs(detector[k]);
      const double target = std::sqrt(measured[k]);
      detector[k] = modulus < kProjectionFloor ? cplx(target, 0.0) : detector[k] * (target / modulus);
    }
    propagator.adjoint(detector);  // revised exit wave

    const double probe_peak = max_norm(probe.values());
    const double window_peak = max_norm(window.values());
    const auto r0 = static_cast<std::size_t>(pos.pixel.row);
    const auto c0 = static_cast<std::size_t>(pos.pixel.col);
    for (std::size_t r = 0; r < n; ++r) {
      cplx* obj_row = object.data() + (r0 + r) * object.cols() + c0;
      for (std::size_t c = 0; c < n; ++c) {
        const std::size_t k = r * n + c;
        const cplx delta = detector[k] - psi[k];
        const double obj_denom = (1.0 - reg) * std::norm(probe[k]) + reg * probe_peak;
        if (obj_denom > 0.0) obj_row[c] += config.alpha_obj * std::conj(probe[k]) / obj_denom * delta;
        if (update_probe) {
          const double probe_denom = (1.0 - reg) * std::norm(window[k]) + reg * window_peak;
          if (probe_denom > 0.0) probe[k] += config.beta_probe * std::conj(window[k]) / probe_denom * delta;
        }
      }
    }
  }
  ++state.epoch;
  return error / (static_cast<double>(dataset.positions.size()) * static_cast<double>(n * n));
}

// Noisy data push the iterates along the O/c, cP ambiguity; barely lit object
// pixels cannot follow, and momentum amplifies the drift until they blow up.
// Holding the probe energy fixed stops the drift (the lit object re-absorbs the
// scale on the next sweep). Returns the factor applied to the probe.
double hold_probe_energy(ComplexField& probe, double target) {
  const double now = energy(probe);
  if (!(now > 0.0) || now == target) return 1.0;
  const double c = std::sqrt(target / now);
  for (auto& v : probe) v *= c;
  return c;
}

void apply_momentum(ComplexField& field, ComplexField& velocity, ComplexField& previous, double friction,
                    double gain) {
  for (std::size_t k = 0; k < field.size(); ++k) {
    velocity[k] = friction * velocity[k] + (field[k] - previous[k]);
    field[k] += gain * velocity[k];
  }
  previous = field;
}

}  // namespace

void PieConfig::validate() const {
  if (!(alpha_obj > 0.0) || !(beta_probe > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "PIE step sizes must be positive");
  }
  if (!(reg_alpha >= 0.0 && reg_alpha <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "mPIE regularization must lie in [0, 1]");
  }
  if (!(friction >= 0.0 && friction < 1.0)) throw Error(ErrorKind::InvalidArgument, "friction must lie in [0, 1)");
  if (!(momentum_gain >= 0.0)) throw Error(ErrorKind::InvalidArgument, "momentum gain must be >= 0");
}

MomentumBuffers MomentumBuffers::for_state(const ReconstructionState& state) {
  const ComplexField& o = state.object;
  const ComplexField& p = state.probe;
  return MomentumBuffers{ComplexField(o.rows(), o.cols(), o.pitch()), ComplexField(p.rows(), p.cols(), p.pitch()),
                         o, p};
}

ComplexField fourier_magnitude_project(const ComplexField& psi, const RealArray& measured) {
  if (psi.rows() != measured.rows() || psi.cols() != measured.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "projection: field and intensity shapes differ");
  }
  ComplexField out = psi;
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (measured[k] < 0.0) {
      throw Error(ErrorKind::InvalidArgument, fmt::format("negative measured intensity at flat index {}", k));
    }
    const double modulus = std::abs(out[k]);
    const double target = std::sqrt(measured[k]);
    out[k] = modulus < kProjectionFloor ? cplx(target, 0.0) : out[k] * (target / modulus);
  }
  return out;
}

std::vector<std::size_t> sweep_order(std::size_t count, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed, 0x5EED0000ULL + static_cast<std::uint64_t>(epoch));
  for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

double epie_epoch(ReconstructionState& state, const PtychoDataset& dataset, const PieConfig& config) {
  config.validate();
  const double target = energy(state.probe);
  const double error = pie_sweep(state, dataset, config, 1.0);
  hold_probe_energy(state.probe, target);
  return error;
}

double mpie_epoch(ReconstructionState& state, const PtychoDataset& dataset, const PieConfig& config,
                  MomentumBuffers& buffers) {
  config.validate();
  const double target = energy(state.probe);
  const double error = pie_sweep(state, dataset, config, config.reg_alpha);
  apply_momentum(state.object, buffers.v_object, buffers.prev_object, config.friction, config.momentum_gain);
  apply_momentum(state.probe, buffers.v_probe, buffers.prev_probe, config.friction, config.momentum_gain);
  const double c = hold_probe_energy(state.probe, target);
  if (c != 1.0) {
    for (auto& v : buffers.v_probe) v *= c;
    buffers.prev_probe = state.probe;
  }
  return error;
}

SolverResult run_pie(const PtychoDataset& dataset, ReconstructionState init, const PieConfig& config,
                     PieVariant variant, const RunLimits& limits, const TruthReference* truth) {
  config.validate();
  const char* name = variant == PieVariant::EPie ? "epie" : "mpie";
  SolverResult result{std::move(init), {}};
  ReconstructionState& state = result.state;
  MomentumBuffers buffers = MomentumBuffers::for_state(state);
  std::optional<ReconstructionState> best;
  double best_corr = -1.0;
  SolverClock clock;
  for (int e = 0; e < limits.max_epochs && clock.elapsed() < limits.time_budget_s; ++e) {
    clock.start();
    const double error = variant == PieVariant::EPie ? epie_epoch(state, dataset, config)
                                                     : mpie_epoch(state, dataset, config, buffers);
    clock.stop();
    if (!std::isfinite(error)) throw DivergenceError(state.epoch, name);
    record_epoch(result.log, state, clock.elapsed(), error, truth);
    if (limits.keep_best && truth && result.log.back().corr_abs > best_corr) {
      best_corr = result.log.back().corr_abs;
      best = state;
    }
  }
  if (best) result.state = std::move(*best);
  return result;
}

}  // namespace ptycho
