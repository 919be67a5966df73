#pragma once

#include <cstdint>
#include <vector>

#include "ptycho/model.hpp"
#include "ptycho/solver.hpp"

namespace ptycho {

/// Step sizes and momentum settings for ePIE/mPIE. Defaults are the values the
/// acceptance runs were tuned with (see README).
struct PieConfig {
  double alpha_obj = 0.25;
  double beta_probe = 0.25;
  double reg_alpha = 1.0;       // mPIE denominator mix between |P|^2 and max |P|^2
  double friction = 0.9;        // eta
  double momentum_gain = 0.2;
  bool probe_update_enabled = true;
  int probe_start_epoch = 1;    // object-only sweeps before this epoch index
  std::uint64_t seed = 0;       // position order

  void validate() const;
};

/// Velocity and snapshot buffers for the mPIE momentum step.
struct MomentumBuffers {
  ComplexField v_object;
  ComplexField v_probe;
  ComplexField prev_object;
  ComplexField prev_probe;

  static MomentumBuffers for_state(const ReconstructionState& state);
};

/// Replaces the modulus of psi by sqrt(measured), keeping its phase; pixels with
/// |psi| < 1e-12 get phase zero.
ComplexField fourier_magnitude_project(const ComplexField& psi, const RealArray& measured);

/// Seeded shuffle of position indices for the given epoch.
std::vector<std::size_t> sweep_order(std::size_t count, std::uint64_t seed, int epoch);

/// One ePIE pass over all positions; returns the pre-update squared error
/// accumulated during the sweep, normalized like mse_loss. The probe energy is
/// restored at the end of the epoch.
double epie_epoch(ReconstructionState& state, const PtychoDataset& dataset, const PieConfig& config);

/// One mPIE pass (regularized denominators) followed by the momentum step, with
/// the same probe energy hold.
double mpie_epoch(ReconstructionState& state, const PtychoDataset& dataset, const PieConfig& config,
                  MomentumBuffers& buffers);

enum class PieVariant { EPie, MPie };

/// Runs sweeps until the epoch or time limit; logs after every epoch.
SolverResult run_pie(const PtychoDataset& dataset, ReconstructionState init, const PieConfig& config,
                     PieVariant variant, const RunLimits& limits, const TruthReference* truth = nullptr);

}  // namespace ptycho
