#pragma once

#include <random>

#include "oracles.hpp"
#include "ptycho/model.hpp"

namespace testing_support {

using namespace ptycho;

struct Instance {
  PtychoDataset dataset;
  ReconstructionState truth;
};

// Random object and probe, `count` positions scattered inside an object of
// n + span pixels, frames from the forward model. `noise` adds non-negative
// uniform perturbations so the truth is no longer a zero of the loss.
inline Instance small_instance(std::size_t n, std::size_t count, PropagatorKind kind, unsigned seed,
                               double noise = 0.0, std::size_t span = 6) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<long> offset(0, static_cast<long>(span));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double z = kind == PropagatorKind::Fraunhofer ? 0.05 : 40e-6;
  Instance inst;
  inst.dataset.geometry = make_geometry(kind, 0.5e-6, z, 1e-6, n);
  const double pitch = inst.dataset.geometry.object_pitch;
  const std::size_t m = n + span + (span % 2);
  inst.dataset.object_rows = inst.dataset.object_cols = m;

  inst.truth.object = oracle::random_field(m, m, seed * 7 + 1, pitch);
  inst.truth.probe = oracle::random_field(n, n, seed * 7 + 2, pitch);
  for (auto& v : inst.truth.object) v *= 0.5;
  for (auto& v : inst.truth.probe) v *= 0.5;
  inst.truth.z_estimate = z;

  for (std::size_t i = 0; i < count; ++i) {
    const long r = offset(gen), c = offset(gen);
    inst.dataset.positions.push_back(make_position(i, r * pitch, c * pitch, pitch));
    RealArray frame = predict_intensity(inst.truth, inst.dataset.geometry, inst.dataset.positions.back());
    for (double& v : frame) v += noise * unit(gen);
    inst.dataset.frames.push_back(std::move(frame));
  }
  return inst;
}

}  // namespace testing_support
