#include "ptycho/simulate.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ptycho/error.hpp"
#include "ptycho/parallel.hpp"

namespace ptycho {

namespace {

constexpr double kPi = std::numbers::pi;

double radius_from_center(std::size_t r, std::size_t c, std::size_t rows, std::size_t cols) {
  const double dy = static_cast<double>(r) - static_cast<double>(rows / 2);
  const double dx = static_cast<double>(c) - static_cast<double>(cols / 2);
  return std::hypot(dy, dx);
}

RealArray gaussian_blur(const RealArray& in, double sigma) {
  const int half = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
  double total = 0.0;
  for (int i = -half; i <= half; ++i) {
    kernel[static_cast<std::size_t>(i + half)] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[static_cast<std::size_t>(i + half)];
  }
  for (double& k : kernel) k /= total;

  const long rows = static_cast<long>(in.rows());
  const long cols = static_cast<long>(in.cols());
  auto clamp_index = [](long i, long n) { return std::clamp(i, 0L, n - 1); };
  RealArray tmp(in.rows(), in.cols());
  RealArray out(in.rows(), in.cols());
  for (long r = 0; r < rows; ++r) {
    for (long c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int k = -half; k <= half; ++k) {
        s += kernel[static_cast<std::size_t>(k + half)] *
             in(static_cast<std::size_t>(r), static_cast<std::size_t>(clamp_index(c + k, cols)));
      }
      tmp(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = s;
    }
  }
  for (long r = 0; r < rows; ++r) {
    for (long c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int k = -half; k <= half; ++k) {
        s += kernel[static_cast<std::size_t>(k + half)] *
             tmp(static_cast<std::size_t>(clamp_index(r + k, rows)), static_cast<std::size_t>(c));
      }
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = s;
    }
  }
  return out;
}

// Sum of soft-edged random ellipses, rescaled to [0, 1].
RealArray blob_image(std::size_t size, Rng& rng, int count) {
  RealArray img(size, size, 0.0);
  const double m = static_cast<double>(size);
  for (int e = 0; e < count; ++e) {
    const double cy = rng.uniform(0.1, 0.9) * m;
    const double cx = rng.uniform(0.1, 0.9) * m;
    const double ay = rng.uniform(0.03, 0.22) * m;
    const double ax = rng.uniform(0.03, 0.22) * m;
    const double theta = rng.uniform(0.0, kPi);
    const double weight = rng.uniform(-0.6, 1.0);
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t c = 0; c < size; ++c) {
        const double y = static_cast<double>(r) - cy;
        const double x = static_cast<double>(c) - cx;
        const double u = (ct * x + st * y) / ax;
        const double v = (-st * x + ct * y) / ay;
        if (u * u + v * v <= 1.0) img(r, c) += weight;
      }
    }
  }
  img = gaussian_blur(img, 1.5);
  const auto [lo, hi] = std::minmax_element(img.begin(), img.end());
  const double low = *lo;
  const double range = *hi - *lo;
  for (double& v : img) v = range > 0.0 ? (v - low) / range : 0.0;
  return img;
}

double distance(const Point2& a, const Point2& b) { return std::hypot(a.y - b.y, a.x - b.x); }

// Uniform background grid for neighbour queries with cell size spacing/sqrt(2),
// so each cell holds at most one point.
class PointGrid {
 public:
  PointGrid(double extent, double spacing)
      : cell_(spacing / std::numbers::sqrt2),
        spacing_(spacing),
        dim_(static_cast<std::size_t>(std::floor(extent / cell_)) + 1),
        cells_(dim_ * dim_, -1) {}

  bool accepts(const Point2& p, const std::vector<Point2>& points) const {
    const long gy = cell_of(p.y);
    const long gx = cell_of(p.x);
    for (long y = gy - 2; y <= gy + 2; ++y) {
      for (long x = gx - 2; x <= gx + 2; ++x) {
        if (y < 0 || x < 0 || y >= static_cast<long>(dim_) || x >= static_cast<long>(dim_)) continue;
        const int idx = cells_[static_cast<std::size_t>(y) * dim_ + static_cast<std::size_t>(x)];
        if (idx >= 0 && distance(points[static_cast<std::size_t>(idx)], p) < spacing_) return false;
      }
    }
    return true;
  }

  void insert(const Point2& p, int index) {
    cells_[static_cast<std::size_t>(cell_of(p.y)) * dim_ + static_cast<std::size_t>(cell_of(p.x))] = index;
  }

 private:
  long cell_of(double v) const {
    return std::clamp(static_cast<long>(std::floor(v / cell_)), 0L, static_cast<long>(dim_) - 1);
  }

  double cell_;
  double spacing_;
  std::size_t dim_;
  std::vector<int> cells_;
};

}  // namespace

ComplexField Phantom::to_object(double pitch) const {
  if (!transmittance.same_shape(phase)) {
    throw Error(ErrorKind::ShapeMismatch, "phantom transmittance and phase differ in shape");
  }
  ComplexField object(transmittance.rows(), transmittance.cols(), pitch);
  for (std::size_t i = 0; i < object.size(); ++i) object[i] = std::polar(transmittance[i], phase[i]);
  return object;
}

NoiseSpec NoiseSpec::noiseless(double photon_scale) {
  NoiseSpec spec;
  spec.photon_scale = photon_scale;
  spec.gaussian_sigma = 0.0;
  spec.shot_noise = false;
  spec.bit_depth.reset();
  return spec;
}

void NoiseSpec::validate() const {
  if (!(photon_scale > 0.0) || !std::isfinite(photon_scale)) {
    throw Error(ErrorKind::InvalidArgument, "photon_scale must be positive");
  }
  if (!(gaussian_sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "gaussian_sigma must be >= 0");
  if (bit_depth && (*bit_depth < 8 || *bit_depth > 16)) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("bit depth {} outside [8, 16]", *bit_depth));
  }
}

void TrajectorySpec::validate() const {
  if (!(overlap > 0.0 && overlap < 1.0)) throw Error(ErrorKind::InvalidArgument, "overlap must lie in (0, 1)");
  if (num_positions < 1) throw Error(ErrorKind::InvalidArgument, "need at least one position");
  if (!(probe_diameter > 0.0)) throw Error(ErrorKind::InvalidArgument, "probe diameter must be positive");
}

ComplexField make_probe(ProbeKind kind, double diameter, const PtychoGeometry& geometry) {
  const std::size_t n = geometry.frame_size;
  const double pitch = geometry.object_pitch;
  if (!(diameter > 0.0) || diameter > static_cast<double>(n) * pitch * (1.0 + 1e-12)) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("probe diameter {} m does not fit the {}-pixel frame", diameter, n));
  }
  const double radius = 0.5 * diameter / pitch;  // pixels
  ComplexField probe(n, n, pitch);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double rho = radius_from_center(r, c, n, n);
      double amplitude = 0.0;
      if (kind == ProbeKind::Aperture) {
        if (rho <= radius - 1.0) {
          amplitude = 1.0;
        } else if (rho < radius + 1.0) {
          amplitude = 0.5 * (1.0 + std::cos(kPi * (rho - (radius - 1.0)) / 2.0));
        }
      } else {
        amplitude = std::exp(-2.0 * rho * rho / (radius * radius));
      }
      probe(r, c) = amplitude;
    }
  }
  const double scale = 1.0 / std::sqrt(energy(probe));
  for (auto& v : probe) v *= scale;
  return probe;
}

Phantom sector_star(std::size_t size, int num_spokes, double inner_radius_px) {
  if (num_spokes < 2 || num_spokes % 2 != 0) {
    throw Error(ErrorKind::InvalidArgument, "sector star needs an even number of spokes >= 2");
  }
  Phantom star{RealArray(size, size, 1.0), RealArray(size, size, 0.0)};
  const double sector = 2.0 * kPi / num_spokes;
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      if (radius_from_center(r, c, size, size) < inner_radius_px) continue;
      const double dy = static_cast<double>(r) - static_cast<double>(size / 2);
      const double dx = static_cast<double>(c) - static_cast<double>(size / 2);
      double angle = std::atan2(dy, dx);
      if (angle < 0.0) angle += 2.0 * kPi;
      const auto index = static_cast<long>(std::floor(angle / sector)) % num_spokes;
      star.transmittance(r, c) = (index % 2 == 0) ? 1.0 : 0.0;
    }
  }
  return star;
}

Phantom random_phantom(std::size_t size, std::uint64_t seed) {
  Rng amplitude_rng(seed, 0xA11);
  Rng phase_rng(seed, 0xF00);
  Phantom p{blob_image(size, amplitude_rng, 28), blob_image(size, phase_rng, 28)};
  for (double& v : p.transmittance) v = 0.3 + 0.7 * v;
  for (double& v : p.phase) v = (v - 0.5) * kPi;
  return p;
}

std::vector<Point2> poisson_disk_positions(double extent, double min_spacing, std::uint64_t seed) {
  if (!(min_spacing > 0.0)) throw Error(ErrorKind::InvalidArgument, "min_spacing must be positive");
  if (extent < min_spacing) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("extent {} is smaller than the spacing {}", extent, min_spacing));
  }
  constexpr int kCandidates = 30;
  Rng rng(seed, 0xB41D);
  PointGrid grid(extent, min_spacing);
  std::vector<Point2> points;
  std::vector<std::size_t> active;

  auto add = [&](const Point2& p) {
    grid.insert(p, static_cast<int>(points.size()));
    active.push_back(points.size());
    points.push_back(p);
  };
  add({rng.uniform(0.0, extent), rng.uniform(0.0, extent)});

  while (!active.empty()) {
    const std::size_t slot = rng.below(active.size());
    const Point2 origin = points[active[slot]];
    bool placed = false;
    for (int k = 0; k < kCandidates; ++k) {
      const double rho = min_spacing * std::sqrt(rng.uniform(1.0, 4.0));
      const double phi = rng.uniform(0.0, 2.0 * kPi);
      const Point2 cand{origin.y + rho * std::sin(phi), origin.x + rho * std::cos(phi)};
      if (cand.y < 0.0 || cand.x < 0.0 || cand.y > extent || cand.x > extent) continue;
      if (grid.accepts(cand, points)) {
        add(cand);
        placed = true;
        break;
      }
    }
    if (!placed) {
      active[slot] = active.back();
      active.pop_back();
    }
  }

  // Fill pass over a fine lattice closes the gaps dart throwing leaves behind.
  const double step = min_spacing / 16.0;
  const auto steps = static_cast<std::size_t>(std::floor(extent / step));
  for (std::size_t i = 0; i <= steps; ++i) {
    for (std::size_t j = 0; j <= steps; ++j) {
      const Point2 cand{static_cast<double>(i) * step, static_cast<double>(j) * step};
      if (grid.accepts(cand, points)) {
        grid.insert(cand, static_cast<int>(points.size()));
        points.push_back(cand);
      }
    }
  }
  return points;
}

std::vector<Point2> concentric_positions(int num_rings, double radial_step) {
  std::vector<Point2> points{{0.0, 0.0}};
  for (int ring = 1; ring <= num_rings; ++ring) {
    const int count = static_cast<int>(std::ceil(2.0 * kPi * ring));
    const double radius = ring * radial_step;
    for (int k = 0; k < count; ++k) {
      const double phi = 2.0 * kPi * k / count;
      points.push_back({radius * std::sin(phi), radius * std::cos(phi)});
    }
  }
  return points;
}

std::vector<Point2> raster_jittered_positions(double extent, double spacing, std::uint64_t seed) {
  if (!(spacing > 0.0) || extent < 0.0) throw Error(ErrorKind::InvalidArgument, "bad raster geometry");
  Rng rng(seed, 0x5A5);
  const double jitter = 0.1 * spacing;
  std::vector<Point2> points;
  const auto count = static_cast<std::size_t>(std::floor(extent / spacing)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < count; ++j) {
      const double y = std::clamp(static_cast<double>(i) * spacing + rng.uniform(-jitter, jitter), 0.0, extent);
      const double x = std::clamp(static_cast<double>(j) * spacing + rng.uniform(-jitter, jitter), 0.0, extent);
      points.push_back({y, x});
    }
  }
  return points;
}

std::vector<Point2> make_trajectory(const TrajectorySpec& spec, double extent) {
  spec.validate();
  std::vector<Point2> points;
  const Point2 center{extent / 2.0, extent / 2.0};
  switch (spec.kind) {
    case TrajectoryKind::PoissonDisk:
      points = poisson_disk_positions(extent, spec.spacing(), spec.seed);
      break;
    case TrajectoryKind::RasterJittered:
      points = raster_jittered_positions(extent, spec.spacing(), spec.seed);
      break;
    case TrajectoryKind::Concentric: {
      const int rings = static_cast<int>(std::floor(extent / 2.0 / spec.spacing()));
      points = concentric_positions(rings, spec.spacing());
      for (auto& p : points) {
        p.y += center.y;
        p.x += center.x;
      }
      break;
    }
  }
  if (points.size() < spec.num_positions) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("trajectory holds only {} of the requested {} positions", points.size(),
                            spec.num_positions));
  }
  std::stable_sort(points.begin(), points.end(), [&](const Point2& a, const Point2& b) {
    return distance(a, center) < distance(b, center);
  });
  points.resize(spec.num_positions);
  return points;
}

double noisy_count(double mean, const NoiseSpec& noise, Rng& rng) {
  double value = noise.shot_noise ? rng.poisson(mean) : mean;
  if (noise.gaussian_sigma > 0.0) value += noise.gaussian_sigma * rng.normal();
  return value;
}

PtychoDataset synthesize(const Phantom& phantom, const ComplexField& probe, std::span<const Point2> trajectory,
                         const PtychoGeometry& geometry, const NoiseSpec& noise) {
  geometry.validate();
  noise.validate();
  if (trajectory.empty()) throw Error(ErrorKind::InvalidArgument, "empty trajectory");

  PtychoDataset dataset;
  dataset.geometry = geometry;
  const ComplexField object = phantom.to_object(geometry.object_pitch);
  dataset.object_rows = object.rows();
  dataset.object_cols = object.cols();
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    dataset.positions.push_back(make_position(i, trajectory[i].y, trajectory[i].x, geometry.object_pitch));
    require_window_inside(object.rows(), object.cols(), dataset.positions.back(), geometry.frame_size);
  }

  const Propagator propagator = make_propagator(geometry, geometry.z);
  dataset.frames.resize(trajectory.size());
  parallel_for(trajectory.size(), [&](std::size_t i) {
    dataset.frames[i] = predict_intensity(object, probe, dataset.positions[i], propagator);
  });

  double peak = 0.0;
  for (const auto& f : dataset.frames) peak = std::max(peak, *std::max_element(f.begin(), f.end()));
  if (peak <= 0.0) throw Error(ErrorKind::ZeroEnergy, "synthetic frames carry no signal");
  const double scale = noise.photon_scale / peak;
  const double ceiling = noise.bit_depth ? std::ldexp(1.0, *noise.bit_depth) - 1.0 : 0.0;

  parallel_for(trajectory.size(), [&](std::size_t i) {
    Rng rng(noise.seed, i);
    for (double& v : dataset.frames[i]) {
      v = noisy_count(v * scale, noise, rng);
      v = std::max(v, 0.0);
      if (noise.bit_depth) v = std::min(std::floor(v), ceiling);
    }
  });

  nlohmann::json noise_meta{{"photon_scale", noise.photon_scale},
                            {"gaussian_sigma", noise.gaussian_sigma},
                            {"shot_noise", noise.shot_noise},
                            {"intensity_scale", scale}};
  noise_meta["bit_depth"] = noise.bit_depth ? nlohmann::json(*noise.bit_depth) : nlohmann::json(nullptr);
  dataset.noise_json = noise_meta.dump();
  dataset.rng_json = nlohmann::json{{"algorithm", kRngAlgorithm}, {"seed", noise.seed}}.dump();
  return dataset;
}

SimulationPreset SimulationPreset::full() {
  SimulationPreset p;
  p.trajectory.probe_diameter = p.probe_diameter();
  return p;
}

SimulationPreset SimulationPreset::desk() {
  SimulationPreset p;
  p.object_size = 256;
  p.frame_size = 112;
  p.trajectory.probe_diameter = p.probe_diameter();
  return p;
}

PtychoGeometry SimulationPreset::geometry() const {
  return make_geometry(propagator, wavelength, z, pixel_pitch, frame_size);
}

double SimulationPreset::probe_diameter() const {
  return static_cast<double>(frame_size) * geometry().object_pitch / 4.0;
}

Simulation simulate_preset(const SimulationPreset& preset, std::uint64_t seed) {
  const PtychoGeometry geometry = preset.geometry();
  const double pitch = geometry.object_pitch;
  constexpr std::size_t kMargin = 4;  // pixels on each side of the scan area
  if (preset.object_size < preset.frame_size + 2 * kMargin + 2) {
    throw Error(ErrorKind::InvalidArgument, "object too small for the frame size");
  }
  const double extent =
      static_cast<double>(preset.object_size - preset.frame_size - 2 * kMargin) * pitch;

  TrajectorySpec trajectory = preset.trajectory;
  trajectory.probe_diameter = preset.probe_diameter();
  trajectory.seed = splitmix64(seed ^ 0x7A1EC7);
  std::vector<Point2> points = make_trajectory(trajectory, extent);
  for (auto& p : points) {
    p.y += static_cast<double>(kMargin) * pitch;
    p.x += static_cast<double>(kMargin) * pitch;
  }

  const Phantom phantom = random_phantom(preset.object_size, seed);
  const ComplexField probe = make_probe(preset.probe, preset.probe_diameter(), geometry);
  NoiseSpec noise = preset.noise;
  noise.seed = seed;

  Simulation sim{synthesize(phantom, probe, points, geometry, noise), phantom.to_object(pitch), probe};
  return sim;
}

}  // namespace ptycho
