#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ptycho/fields.hpp"
#include "ptycho/optics.hpp"

namespace ptycho {

/// Experimental geometry shared by the simulator and every solver.
struct PtychoGeometry {
  double wavelength = 0.0;      // m
  double z = 0.0;               // object-detector distance, m
  double detector_pitch = 0.0;  // m
  double object_pitch = 0.0;    // m
  std::size_t frame_size = 0;   // N (frames are N x N)
  PropagatorKind propagator = PropagatorKind::AngularSpectrum;

  /// Validates lengths and frame size; throws InvalidArgument.
  void validate() const;
};

/// Geometry whose object pitch follows the propagator's grid relation.
PtychoGeometry make_geometry(PropagatorKind kind, double wavelength, double z,
                             double detector_pitch, std::size_t frame_size);

struct PixelOffset {
  long row = 0;
  long col = 0;
  friend bool operator==(const PixelOffset&, const PixelOffset&) = default;
};

/// Lateral object displacement for one exposure. `offset_m` locates the
/// top-left corner of the probe window inside the object array.
struct ScanPosition {
  std::size_t index = 0;
  double offset_y_m = 0.0;
  double offset_x_m = 0.0;
  PixelOffset pixel;  // round(offset / object_pitch)
};

ScanPosition make_position(std::size_t index, double offset_y_m, double offset_x_m, double object_pitch);

struct PtychoDataset {
  PtychoGeometry geometry;
  std::vector<ScanPosition> positions;
  std::vector<RealArray> frames;
  double normalization_scale = 1.0;
  bool normalized = false;
  /// Object array shape used by solvers; {0, 0} derives it from the positions.
  std::size_t object_rows = 0;
  std::size_t object_cols = 0;
  /// Free-form provenance (noise parameters, RNG algorithm) carried into file headers.
  std::string noise_json;
  std::string rng_json;

  void validate() const;
};

/// Divides every frame by the global maximum and records it in normalization_scale.
void normalize(PtychoDataset& dataset);

struct ReconstructionState {
  ComplexField object;
  ComplexField probe;
  double z_estimate = 0.0;
  int epoch = 0;
};

/// Smallest object array holding every window plus an 8-pixel margin.
std::size_t object_size_for(std::span<const ScanPosition> positions, std::size_t frame_size);

/// Throws OutOfBounds naming the position when the window leaves the object.
void require_window_inside(std::size_t object_rows, std::size_t object_cols, const ScanPosition& pos,
                           std::size_t n);

/// N x N copy of `object` starting at the position's pixel offset.
ComplexField extract_window(const ComplexField& object, const ScanPosition& pos, std::size_t n);

/// Adjoint of extract_window: accumulates `window` into `target` at the offset.
void embed_add(ComplexField& target, const ComplexField& window, const ScanPosition& pos);

/// Projection-approximation exit wave: window(O) * P.
ComplexField exit_wave(const ComplexField& object, const ComplexField& probe, const ScanPosition& pos);

/// |propagate(exit wave)|^2 using the state's distance estimate.
RealArray predict_intensity(const ReconstructionState& state, const PtychoGeometry& geometry,
                            const ScanPosition& pos);

/// Intensity through a prebuilt propagator (hot path of the solvers).
RealArray predict_intensity(const ComplexField& object, const ComplexField& probe,
                            const ScanPosition& pos, const Propagator& propagator);

/// Mean over positions and pixels of (I_meas - I_pred)^2.
double mse_loss(const PtychoDataset& dataset, const ReconstructionState& state);

/// Sum over pixels of (measured - predicted)^2 for one frame.
double frame_squared_error(const RealArray& measured, const RealArray& predicted);

Propagator make_propagator(const PtychoGeometry& geometry, double z);

}  // namespace ptycho
