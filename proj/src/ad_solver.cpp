#include "ptycho/ad_solver.hpp"

#include <cmath>
#include <numeric>

#include "ptycho/error.hpp"
#include "ptycho/pie.hpp"

namespace ptycho {

namespace {

void adam_update(ComplexField& param, const ComplexField& grad, ComplexField& m, RealArray& v, double lr,
                 const AdConfig& c, double bias1, double bias2) {
  if (m.empty()) {
    m = ComplexField(param.rows(), param.cols(), param.pitch());
    v = RealArray(param.rows(), param.cols());
  }
  for (std::size_t k = 0; k < param.size(); ++k) {
    m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * grad[k];
    v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * std::norm(grad[k]);
    const cplx m_hat = m[k] / bias1;
    const double v_hat = v[k] / bias2;
    param[k] -= lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace

void AdConfig::validate() const {
  auto check = [](bool trainable, double lr, const char* name) {
    if (trainable && !(lr > 0.0 && std::isfinite(lr))) {
      throw Error(ErrorKind::InvalidArgument, std::string("learning rate for ") + name + " must be positive");
    }
  };
  check(train_object, lr_object, "object");
  check(train_probe, lr_probe, "probe");
  check(train_z, lr_z, "z");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "invalid Adam hyperparameters");
  }
}

void adam_step(ReconstructionState& params, const WirtingerGrad& grads, AdamState& adam, const AdConfig& config) {
  ++adam.t;
  const double bias1 = 1.0 - std::pow(config.beta1, adam.t);
  const double bias2 = 1.0 - std::pow(config.beta2, adam.t);
  if (config.train_object) {
    adam_update(params.object, grads.object, adam.m_object, adam.v_object, config.lr_object, config, bias1, bias2);
  }
  if (config.train_probe) {
    adam_update(params.probe, grads.probe, adam.m_probe, adam.v_probe, config.lr_probe, config, bias1, bias2);
  }
  if (config.train_z) {
    const double g = grads.z;
    adam.m_z = config.beta1 * adam.m_z + (1.0 - config.beta1) * g;
    adam.v_z = config.beta2 * adam.v_z + (1.0 - config.beta2) * g * g;
    params.z_estimate -= config.lr_z * (adam.m_z / bias1) / (std::sqrt(adam.v_z / bias2) + config.epsilon);
  }
}

SolverResult reconstruct_ad(const PtychoDataset& dataset, ReconstructionState init, const AdConfig& config,
                            const RunLimits& limits, const TruthReference* truth) {
  config.validate();
  if (config.train_z && dataset.geometry.propagator != PropagatorKind::AngularSpectrum) {
    throw Error(ErrorKind::Unsupported,
                "a trainable distance needs the angular spectrum model; the Fraunhofer map has no z dependence");
  }
  SolverResult result{std::move(init), {}};
  ReconstructionState& state = result.state;
  AdamState adam;
  std::optional<ReconstructionState> best;
  double best_corr = -1.0;
  SolverClock clock;

  const std::size_t count = dataset.positions.size();
  const std::size_t batch = config.batch_size == 0 ? count : std::min(config.batch_size, count);

  for (int e = 0; e < limits.max_epochs && clock.elapsed() < limits.time_budget_s; ++e) {
    clock.start();
    double loss_sum = 0.0;
    if (batch == count) {
      const Recording rec = forward_record(state, dataset, {}, config.train_z);
      loss_sum = rec.loss;
      if (std::isfinite(rec.loss)) adam_step(state, backward(rec.tape), adam, config);
    } else {
      const std::vector<std::size_t> order = sweep_order(count, config.seed, state.epoch);
      for (std::size_t start = 0; start < count; start += batch) {
        const std::size_t stop = std::min(start + batch, count);
        const std::span<const std::size_t> subset(order.data() + start, stop - start);
        const Recording rec = forward_record(state, dataset, subset, config.train_z);
        loss_sum += rec.loss * static_cast<double>(subset.size()) / static_cast<double>(count);
        if (!std::isfinite(rec.loss)) break;
        adam_step(state, backward(rec.tape), adam, config);
      }
    }
    ++state.epoch;
    clock.stop();
    if (!std::isfinite(loss_sum) || !std::isfinite(state.z_estimate)) throw DivergenceError(state.epoch, "adam");
    record_epoch(result.log, state, clock.elapsed(), loss_sum, truth);
    if (limits.keep_best && truth && result.log.back().corr_abs > best_corr) {
      best_corr = result.log.back().corr_abs;
      best = state;
    }
  }
  if (best) result.state = std::move(*best);
  return result;
}

DistanceRecovery recover_distance(const PtychoDataset& dataset, ReconstructionState init, AdConfig config,
                                  const ComplexField& known_probe, const RunLimits& limits,
                                  const TruthReference* truth) {
  if (dataset.geometry.propagator != PropagatorKind::AngularSpectrum) {
    throw Error(ErrorKind::Unsupported, "distance recovery needs the angular spectrum model");
  }
  config.train_z = true;
  config.train_probe = false;
  init.probe = known_probe;
  const double z0 = init.z_estimate;
  DistanceRecovery out{reconstruct_ad(dataset, std::move(init), config, limits, truth), {z0}};
  for (const auto& row : out.run.log.rows()) out.z_trajectory.push_back(row.z_m);
  return out;
}

}  // namespace ptycho
