#include "ptycho/solver.hpp"

#include <cmath>

#include "ptycho/error.hpp"
#include "ptycho/simulate.hpp"

namespace ptycho {

TruthReference TruthReference::from(const ComplexField& object, const ComplexField& probe,
                                    std::span<const ScanPosition> positions) {
  return TruthReference{object, scan_mask(object.rows(), object.cols(), positions, probe), 8};
}

CorrelationReport TruthReference::evaluate(const ComplexField& estimate) const {
  return registered_correlation(object, estimate, crop_margin, mask.empty() ? nullptr : &mask);
}

ReconstructionState initial_state(const PtychoDataset& dataset, const std::optional<ComplexField>& known_probe) {
  const PtychoGeometry& g = dataset.geometry;
  std::size_t rows = dataset.object_rows;
  std::size_t cols = dataset.object_cols;
  if (rows == 0 || cols == 0) rows = cols = object_size_for(dataset.positions, g.frame_size);

  ReconstructionState state;
  state.object = ComplexField(rows, cols, g.object_pitch, cplx(1.0, 0.0));
  state.z_estimate = g.z;
  if (known_probe) {
    if (known_probe->rows() != g.frame_size || known_probe->cols() != g.frame_size) {
      throw Error(ErrorKind::ShapeMismatch, "calibrated probe does not match the frame size");
    }
    state.probe = *known_probe;
    state.probe.set_pitch(g.object_pitch);
  } else {
    const double diameter = static_cast<double>(g.frame_size) * g.object_pitch / 4.0;
    state.probe = make_probe(ProbeKind::Aperture, diameter, g);
  }

  // Express the probe in the dataset's units: the propagators are unitary, so
  // a unit object then predicts the measured mean total counts. A calibrated
  // probe keeps its shape; only its global scale changes.
  double mean_counts = 0.0;
  for (const auto& frame : dataset.frames) {
    for (double v : frame) mean_counts += v;
  }
  if (!dataset.frames.empty()) mean_counts /= static_cast<double>(dataset.frames.size());
  const double probe_energy = energy(state.probe);
  if (mean_counts > 0.0 && probe_energy > 0.0) {
    const double scale = std::sqrt(mean_counts / probe_energy);
    for (auto& v : state.probe) v *= scale;
  }
  return state;
}

void record_epoch(ConvergenceLog& log, const ReconstructionState& state, double wall_clock_s, double loss,
                  const TruthReference* truth) {
  ConvergenceRow row;
  row.epoch = state.epoch;
  row.wall_clock_s = wall_clock_s;
  row.loss = loss;
  row.z_m = state.z_estimate;
  if (truth) {
    const CorrelationReport report = truth->evaluate(state.object);
    row.corr_abs = report.abs;
    row.corr_amp = report.amplitude;
    row.corr_phase = report.phase;
  }
  log.append(row);
}

}  // namespace ptycho
