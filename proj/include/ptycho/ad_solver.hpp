#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ptycho/autodiff.hpp"
#include "ptycho/solver.hpp"

namespace ptycho {

struct AdConfig {
  double lr_object = 0.04;
  double lr_probe = 0.04;
  /// Step size for z in metres. Adam steps are roughly lr in size, so this is
  /// close to the distance z can travel per update.
  double lr_z = 1e-3;
  bool train_object = true;
  bool train_probe = true;
  bool train_z = false;
  std::size_t batch_size = 0;  // 0 = full batch, one optimizer step per epoch
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;  // minibatch order

  void validate() const;
};

/// Adam moments. Complex parameters keep a complex first moment and a real
/// second moment accumulated from |g|^2.
struct AdamState {
  int t = 0;
  ComplexField m_object;
  RealArray v_object;
  ComplexField m_probe;
  RealArray v_probe;
  double m_z = 0.0;
  double v_z = 0.0;
};

/// One bias-corrected Adam update of every trainable parameter.
void adam_step(ReconstructionState& params, const WirtingerGrad& grads, AdamState& adam, const AdConfig& config);

/// Full-batch (or minibatch) Adam descent on the intensity MSE. The dataset
/// is expected to be normalized. Throws DivergenceError when the loss stops
/// being finite.
SolverResult reconstruct_ad(const PtychoDataset& dataset, ReconstructionState init, const AdConfig& config,
                            const RunLimits& limits, const TruthReference* truth = nullptr);

struct DistanceRecovery {
  SolverResult run;
  std::vector<double> z_trajectory;  // initial value, then one entry per epoch
};

/// Jointly fits the object and z with the probe held at a calibrated value.
/// Requires the angular spectrum model.
DistanceRecovery recover_distance(const PtychoDataset& dataset, ReconstructionState init, AdConfig config,
                                  const ComplexField& known_probe, const RunLimits& limits,
                                  const TruthReference* truth = nullptr);

}  // namespace ptycho
