#pragma once

#include "ptycho/fields.hpp"

namespace ptycho {

enum class PropagatorKind { AngularSpectrum, Fraunhofer };

struct PropagatorSpec {
  PropagatorKind kind = PropagatorKind::AngularSpectrum;
  double wavelength = 0.0;      // m
  double distance = 0.0;        // m; negative backpropagates (angular spectrum only)
  double source_pitch = 0.0;    // m
  double detector_pitch = 0.0;  // m
};

/// Builds a spec whose pitches satisfy the propagator's grid relation. For
/// Fraunhofer, the source pitch is recomputed as wavelength*z/(n*detector_pitch);
/// for the angular spectrum both planes share the detector pitch.
PropagatorSpec make_propagator_spec(PropagatorKind kind, double wavelength, double distance,
                                    double detector_pitch, std::size_t n);

/// kappa = sqrt(k^2 - kx^2 - ky^2) on the principal branch (imaginary for evanescent waves).
ComplexField axial_wavenumber(const FrequencyGrid& grid, double wavelength);

/// Angular spectrum transfer function H = exp(i*z*kappa), centered layout.
ComplexField transfer_function(const FrequencyGrid& grid, double wavelength, double z);

ComplexField propagate_as(const ComplexField& f, double wavelength, double z);

/// Far-field map: the unitary FFT of f, resampled onto the pitch
/// wavelength*z/(N*source_pitch). Global prefactors are dropped.
ComplexField propagate_fraunhofer(const ComplexField& f, double wavelength, double z);

/// Largest distance for which the angular spectrum transfer function is
/// sampled without aliasing: N*pitch^2/wavelength.
double aliasing_free_distance(std::size_t n, double pitch, double wavelength);

/// Precomputed forward map and its adjoint for a fixed frame shape and geometry.
class Propagator {
 public:
  Propagator(PropagatorKind kind, std::size_t n, double pitch, double wavelength, double z);

  PropagatorKind kind() const noexcept { return kind_; }
  double distance() const noexcept { return z_; }
  const ComplexField& transfer() const noexcept { return transfer_; }
  const ComplexField& kappa() const noexcept { return kappa_; }

  /// In-place object-plane -> detector-plane map.
  void forward(ComplexField& f) const;
  /// In-place adjoint of forward (its inverse on propagating components).
  void adjoint(ComplexField& f) const;

 private:
  PropagatorKind kind_;
  double z_;
  ComplexField transfer_;  // angular spectrum only
  ComplexField kappa_;     // angular spectrum only
};

}  // namespace ptycho
