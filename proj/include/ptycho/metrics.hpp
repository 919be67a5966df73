#pragma once

#include <cstdint>
#include <optional>

#include "ptycho/fields.hpp"
#include "ptycho/model.hpp"

namespace ptycho {

using Mask = Array2D<std::uint8_t>;

/// Linear phase ramp exp(i (ky r + kx c)), radians per pixel.
struct PhaseRamp {
  double ky = 0.0;
  double kx = 0.0;
};

struct CorrelationReport {
  cplx c{};                // complex correlation coefficient
  double abs = 0.0;        // |C|
  double arg = 0.0;        // arg C (global phase, informational)
  double amplitude = 0.0;  // correlation of |O| and |O_hat|
  double phase = 0.0;      // |C| of exp(i arg O) against exp(i arg O_hat)
  PixelShift shift;        // estimate ~ circshift(truth, shift)
  PhaseRamp ramp;          // removed from the estimate before scoring
};

struct RegistrationOptions {
  /// Also remove a linear phase ramp. Blind reconstructions are only defined
  /// up to O exp(ik.r), P exp(-ik.r), the Fourier dual of the shift ambiguity.
  bool compensate_ramp = true;
};

/// C = sum(conj(O) * O_hat) / (||O|| * ||O_hat||). Throws ZeroEnergy when
/// either side vanishes on the evaluated pixels.
cplx complex_correlation(const ComplexField& truth, const ComplexField& estimate);
cplx complex_correlation(const ComplexField& truth, const ComplexField& estimate, const Mask& mask);

/// Pixels illuminated by at least one probe placement, where the footprint of
/// a placement is |P|^2 >= threshold * max |P|^2.
Mask scan_mask(std::size_t rows, std::size_t cols, std::span<const ScanPosition> positions,
               const ComplexField& probe, double threshold = 0.1);

/// Registers the estimate to the truth on a central crop (excluding
/// `crop_margin` pixels on each side), then evaluates the complex, amplitude
/// and phase correlations over the overlap of the crop, the optional mask,
/// and the shifted estimate. The phase ramp is fitted on that same region.
CorrelationReport registered_correlation(const ComplexField& truth, const ComplexField& estimate,
                                         std::size_t crop_margin, const Mask* mask = nullptr,
                                         const RegistrationOptions& options = {});

}  // namespace ptycho
