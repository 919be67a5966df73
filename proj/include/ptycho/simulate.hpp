#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ptycho/fields.hpp"
#include "ptycho/model.hpp"
#include "ptycho/rng.hpp"

namespace ptycho {

/// Object built from a transmittance image in [0, 1] and a phase image in [-pi, pi).
struct Phantom {
  RealArray transmittance;
  RealArray phase;

  ComplexField to_object(double pitch) const;
};

enum class ProbeKind { Aperture, FocusedGaussian };

struct NoiseSpec {
  double photon_scale = 300.0;  // expected counts at the brightest pixel of the dataset
  double gaussian_sigma = 10.0;  // read-out noise, counts
  bool shot_noise = true;
  std::optional<int> bit_depth = 12;  // quantize to [0, 2^bits - 1]; none keeps real values
  std::uint64_t seed = 0;

  static NoiseSpec noiseless(double photon_scale = 300.0);
  void validate() const;
};

enum class TrajectoryKind { PoissonDisk, Concentric, RasterJittered };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::PoissonDisk;
  double overlap = 0.6;         // linear overlap fraction
  double probe_diameter = 0.0;  // m
  std::size_t num_positions = 80;
  std::uint64_t seed = 0;

  /// Center spacing implied by the linear overlap definition: (1 - overlap) * diameter.
  double spacing() const { return (1.0 - overlap) * probe_diameter; }
  void validate() const;
};

struct Point2 {
  double y = 0.0;
  double x = 0.0;
};

/// Circular top-hat (2-pixel cosine edge) or Gaussian whose modulus drops to
/// 1/e^2 of the peak at radius diameter/2. Normalized to unit energy.
ComplexField make_probe(ProbeKind kind, double diameter, const PtychoGeometry& geometry);

/// Binary star with `num_spokes` alternating sectors and a transparent core.
Phantom sector_star(std::size_t size, int num_spokes, double inner_radius_px);

/// Smooth random blobs for transmittance ([0.3, 1]) and phase ([-pi/2, pi/2]).
Phantom random_phantom(std::size_t size, std::uint64_t seed);

/// Bridson dart throwing in [0, extent]^2 followed by a dense fill pass so the
/// set is maximal up to 1/16 of the spacing. Deterministic for a fixed seed.
std::vector<Point2> poisson_disk_positions(double extent, double min_spacing, std::uint64_t seed);

/// Center point plus rings r = 1..num_rings carrying ceil(2*pi*r) points each.
std::vector<Point2> concentric_positions(int num_rings, double radial_step);

/// Grid of the given spacing with uniform jitter of +/- 10 % of the spacing.
std::vector<Point2> raster_jittered_positions(double extent, double spacing, std::uint64_t seed);

/// Trajectory inside [0, extent]^2 with exactly spec.num_positions points: the
/// generated points closest to the square's center.
std::vector<Point2> make_trajectory(const TrajectorySpec& spec, double extent);

/// Synthetic measurement. Clean frames are scaled so the dataset peak equals
/// photon_scale, then shot noise, read noise, clamping, and quantization are
/// applied. Each position draws from its own stream (seed, index).
PtychoDataset synthesize(const Phantom& phantom, const ComplexField& probe,
                         std::span<const Point2> trajectory, const PtychoGeometry& geometry,
                         const NoiseSpec& noise);

/// One noisy pixel: Poisson(mean) + N(0, sigma^2), before clamping.
double noisy_count(double mean, const NoiseSpec& noise, Rng& rng);

struct SimulationPreset {
  std::size_t object_size = 512;
  std::size_t frame_size = 224;
  double wavelength = 561e-9;
  double pixel_pitch = 6.45e-6;
  double z = 35e-3;
  PropagatorKind propagator = PropagatorKind::AngularSpectrum;
  ProbeKind probe = ProbeKind::Aperture;
  TrajectorySpec trajectory;
  NoiseSpec noise;

  /// 512 x 512 object, 224-pixel frames, 80 positions at 60 % overlap, 300 counts, sigma 10, 12 bit.
  static SimulationPreset full();
  /// Same physics on a 256 x 256 object with 112-pixel frames.
  static SimulationPreset desk();

  PtychoGeometry geometry() const;
  double probe_diameter() const;  // m; a quarter of the frame extent
};

struct Simulation {
  PtychoDataset dataset;
  ComplexField truth_object;
  ComplexField truth_probe;
};

/// Phantom, probe, trajectory and noisy frames for a preset; the seed drives
/// the phantom, trajectory and noise streams.
Simulation simulate_preset(const SimulationPreset& preset, std::uint64_t seed);

}  // namespace ptycho
