#include "ptycho/optics.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

#include "ptycho/error.hpp"

namespace ptycho {

namespace {

void require_wavelength(double wavelength) {
  if (!(wavelength > 0.0) || !std::isfinite(wavelength)) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("wavelength {} must be positive", wavelength));
  }
}

void require_far_field_distance(double z) {
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("Fraunhofer propagation needs a positive distance, got {}", z));
  }
}

}  // namespace

PropagatorSpec make_propagator_spec(PropagatorKind kind, double wavelength, double distance,
                                    double detector_pitch, std::size_t n) {
  require_wavelength(wavelength);
  if (!(detector_pitch > 0.0) || n == 0) {
    throw Error(ErrorKind::InvalidArgument, "detector pitch and frame size must be positive");
  }
  PropagatorSpec spec{kind, wavelength, distance, detector_pitch, detector_pitch};
  if (kind == PropagatorKind::Fraunhofer) {
    require_far_field_distance(distance);
    spec.source_pitch = wavelength * distance / (static_cast<double>(n) * detector_pitch);
  }
  return spec;
}

ComplexField axial_wavenumber(const FrequencyGrid& grid, double wavelength) {
  require_wavelength(wavelength);
  const double k = 2.0 * std::numbers::pi / wavelength;
  ComplexField kappa(grid.rows(), grid.cols(), grid.pitch);
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    for (std::size_t c = 0; c < grid.cols(); ++c) {
      kappa(r, c) = std::sqrt(cplx(k * k - grid.k_perp_squared(r, c), 0.0));
    }
  }
  return kappa;
}

ComplexField transfer_function(const FrequencyGrid& grid, double wavelength, double z) {
  ComplexField h = axial_wavenumber(grid, wavelength);
  for (auto& v : h) v = std::exp(cplx(0.0, z) * v);
  require_finite(h.values(), "transfer_function");
  return h;
}

ComplexField propagate_as(const ComplexField& f, double wavelength, double z) {
  const ComplexField h = transfer_function(frequency_grid(f), wavelength, z);
  ComplexField out = fft2_unitary(f);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= h[i];
  ifft2_unitary_inplace(out);
  return out;
}

ComplexField propagate_fraunhofer(const ComplexField& f, double wavelength, double z) {
  require_wavelength(wavelength);
  require_far_field_distance(z);
  if (f.rows() != f.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "Fraunhofer propagation needs a square field");
  }
  ComplexField out = fft2_unitary(f);
  out.set_pitch(wavelength * z / (static_cast<double>(f.cols()) * f.pitch()));
  return out;
}

double aliasing_free_distance(std::size_t n, double pitch, double wavelength) {
  return static_cast<double>(n) * pitch * pitch / wavelength;
}

Propagator::Propagator(PropagatorKind kind, std::size_t n, double pitch, double wavelength, double z)
    : kind_(kind), z_(z) {
  require_wavelength(wavelength);
  if (kind == PropagatorKind::Fraunhofer) {
    require_far_field_distance(z);
    return;
  }
  const FrequencyGrid grid = frequency_grid(n, n, pitch);
  kappa_ = axial_wavenumber(grid, wavelength);
  transfer_ = kappa_;
  for (auto& v : transfer_) v = std::exp(cplx(0.0, z) * v);
  require_finite(transfer_.values(), "transfer_function");
}

void Propagator::forward(ComplexField& f) const {
  fft2_unitary_inplace(f);
  if (kind_ == PropagatorKind::Fraunhofer) return;
  for (std::size_t i = 0; i < f.size(); ++i) f[i] *= transfer_[i];
  ifft2_unitary_inplace(f);
}

void Propagator::adjoint(ComplexField& f) const {
  if (kind_ == PropagatorKind::Fraunhofer) {
    ifft2_unitary_inplace(f);
    return;
  }
  fft2_unitary_inplace(f);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] *= std::conj(transfer_[i]);
  ifft2_unitary_inplace(f);
}

}  // namespace ptycho
