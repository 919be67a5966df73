#include "ptycho/model.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "ptycho/error.hpp"

namespace ptycho {

void PtychoGeometry::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(wavelength) || !positive(z) || !positive(detector_pitch) || !positive(object_pitch)) {
    throw Error(ErrorKind::InvalidArgument, "geometry lengths must be positive and finite");
  }
  if (frame_size < 16 || frame_size % 2 != 0) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("frame size {} must be even and at least 16", frame_size));
  }
}

PtychoGeometry make_geometry(PropagatorKind kind, double wavelength, double z, double detector_pitch,
                             std::size_t frame_size) {
  const PropagatorSpec spec = make_propagator_spec(kind, wavelength, z, detector_pitch, frame_size);
  PtychoGeometry g{wavelength, z, detector_pitch, spec.source_pitch, frame_size, kind};
  g.validate();
  return g;
}

ScanPosition make_position(std::size_t index, double offset_y_m, double offset_x_m, double object_pitch) {
  ScanPosition p{index, offset_y_m, offset_x_m, {}};
  p.pixel.row = std::lround(offset_y_m / object_pitch);
  p.pixel.col = std::lround(offset_x_m / object_pitch);
  return p;
}

void PtychoDataset::validate() const {
  geometry.validate();
  if (positions.empty()) throw Error(ErrorKind::InvalidArgument, "dataset needs at least one position");
  if (frames.size() != positions.size()) {
    throw Error(ErrorKind::ManifestMismatch,
                fmt::format("{} frames for {} positions", frames.size(), positions.size()));
  }
  const std::size_t n = geometry.frame_size;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].rows() != n || frames[i].cols() != n) {
      throw Error(ErrorKind::ShapeMismatch, fmt::format("frame {} is not {}x{}", i, n, n));
    }
    for (double v : frames[i]) {
      if (!std::isfinite(v) || v < 0.0) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("frame {} holds a negative or non-finite intensity", i));
      }
    }
  }
}

void normalize(PtychoDataset& dataset) {
  double peak = 0.0;
  for (const auto& frame : dataset.frames) {
    for (double v : frame) peak = std::max(peak, v);
  }
  if (peak <= 0.0) throw Error(ErrorKind::ZeroEnergy, "cannot normalize a dataset without signal");
  for (auto& frame : dataset.frames) {
    for (double& v : frame) v /= peak;
  }
  dataset.normalization_scale *= peak;
  dataset.normalized = true;
}

std::size_t object_size_for(std::span<const ScanPosition> positions, std::size_t frame_size) {
  long span = 0;
  for (const auto& p : positions) span = std::max({span, p.pixel.row, p.pixel.col});
  std::size_t m = frame_size + static_cast<std::size_t>(span) + 8;
  return m + (m % 2);
}

void require_window_inside(std::size_t object_rows, std::size_t object_cols, const ScanPosition& pos,
                           std::size_t n) {
  const long r = pos.pixel.row;
  const long c = pos.pixel.col;
  if (r < 0 || c < 0 || static_cast<std::size_t>(r) + n > object_rows ||
      static_cast<std::size_t>(c) + n > object_cols) {
    throw Error(ErrorKind::OutOfBounds,
                fmt::format("probe window of position {} at ({}, {}) leaves the {}x{} object", pos.index,
                            r, c, object_rows, object_cols));
  }
}

ComplexField extract_window(const ComplexField& object, const ScanPosition& pos, std::size_t n) {
  require_window_inside(object.rows(), object.cols(), pos, n);
  ComplexField out(n, n, object.pitch());
  const auto r0 = static_cast<std::size_t>(pos.pixel.row);
  const auto c0 = static_cast<std::size_t>(pos.pixel.col);
  for (std::size_t r = 0; r < n; ++r) {
    const cplx* src = object.data() + (r0 + r) * object.cols() + c0;
    std::copy(src, src + n, out.data() + r * n);
  }
  return out;
}

void embed_add(ComplexField& target, const ComplexField& window, const ScanPosition& pos) {
  const std::size_t n = window.rows();
  require_window_inside(target.rows(), target.cols(), pos, n);
  const auto r0 = static_cast<std::size_t>(pos.pixel.row);
  const auto c0 = static_cast<std::size_t>(pos.pixel.col);
  for (std::size_t r = 0; r < n; ++r) {
    cplx* dst = target.data() + (r0 + r) * target.cols() + c0;
    const cplx* src = window.data() + r * n;
    for (std::size_t c = 0; c < n; ++c) dst[c] += src[c];
  }
}

ComplexField exit_wave(const ComplexField& object, const ComplexField& probe, const ScanPosition& pos) {
  if (probe.rows() != probe.cols()) throw Error(ErrorKind::ShapeMismatch, "probe must be square");
  ComplexField psi = extract_window(object, pos, probe.rows());
  for (std::size_t i = 0; i < psi.size(); ++i) psi[i] *= probe[i];
  return psi;
}

Propagator make_propagator(const PtychoGeometry& geometry, double z) {
  return Propagator(geometry.propagator, geometry.frame_size, geometry.object_pitch, geometry.wavelength, z);
}

RealArray predict_intensity(const ComplexField& object, const ComplexField& probe, const ScanPosition& pos,
                            const Propagator& propagator) {
  ComplexField psi = exit_wave(object, probe, pos);
  propagator.forward(psi);
  RealArray out(psi.rows(), psi.cols());
  for (std::size_t i = 0; i < psi.size(); ++i) out[i] = std::norm(psi[i]);
  return out;
}

RealArray predict_intensity(const ReconstructionState& state, const PtychoGeometry& geometry,
                            const ScanPosition& pos) {
  if (state.probe.rows() != geometry.frame_size) {
    throw Error(ErrorKind::ShapeMismatch, "probe does not match the frame size");
  }
  return predict_intensity(state.object, state.probe, pos, make_propagator(geometry, state.z_estimate));
}

double frame_squared_error(const RealArray& measured, const RealArray& predicted) {
  if (!measured.same_shape(predicted)) throw Error(ErrorKind::ShapeMismatch, "frame shapes differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const double d = measured[i] - predicted[i];
    sum += d * d;
  }
  return sum;
}

double mse_loss(const PtychoDataset& dataset, const ReconstructionState& state) {
  if (dataset.frames.size() != dataset.positions.size()) {
    throw Error(ErrorKind::ShapeMismatch, "frame and position counts differ");
  }
  const Propagator propagator = make_propagator(dataset.geometry, state.z_estimate);
  const std::size_t n = dataset.geometry.frame_size;
  double sum = 0.0;
  for (std::size_t i = 0; i < dataset.positions.size(); ++i) {
    const RealArray predicted = predict_intensity(state.object, state.probe, dataset.positions[i], propagator);
    sum += frame_squared_error(dataset.frames[i], predicted);
  }
  return sum / (static_cast<double>(dataset.positions.size()) * static_cast<double>(n * n));
}

}  // namespace ptycho
