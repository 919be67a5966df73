#include "ptycho/config.hpp"

#include <fmt/format.h>

#include <fstream>
#include <set>

#include "ptycho/error.hpp"

namespace ptycho {

namespace {

using Json = nlohmann::json;

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::BadHeader, "config: " + what); }

void only_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_error(where + " must be an object");
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) config_error(fmt::format("unknown key \"{}\" in {}", key, where));
  }
}

template <typename T>
void read(const Json& j, const char* key, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const Json::exception&) {
    config_error(fmt::format("\"{}\" has the wrong type", key));
  }
}

std::size_t square_shape(const Json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const Json& s = j.at(key);
  if (!s.is_array() || s.size() != 2 || !s[0].is_number_unsigned() || s[0] != s[1]) {
    config_error(fmt::format("\"{}\" must be [n, n]", key));
  }
  return s[0].get<std::size_t>();
}

}  // namespace

RunConfig parse_run_config(const Json& j) {
  only_keys(j, "config",
            {"preset", "seed", "wavelength_m", "z_m", "detector_pitch_m", "propagator", "frame_shape",
             "object_shape", "probe", "trajectory", "noise", "epie", "mpie", "adam"});
  RunConfig cfg;
  std::string preset = "desk";
  read(j, "preset", preset);
  if (preset == "full") {
    cfg.preset = SimulationPreset::full();
  } else if (preset != "desk") {
    config_error("preset must be \"desk\" or \"full\"");
  }
  SimulationPreset& p = cfg.preset;
  read(j, "seed", cfg.seed);
  read(j, "wavelength_m", p.wavelength);
  read(j, "z_m", p.z);
  read(j, "detector_pitch_m", p.pixel_pitch);
  if (j.contains("propagator")) {
    std::string name;
    read(j, "propagator", name);
    if (name == "angular_spectrum") {
      p.propagator = PropagatorKind::AngularSpectrum;
    } else if (name == "fraunhofer") {
      p.propagator = PropagatorKind::Fraunhofer;
    } else {
      config_error("propagator must be \"angular_spectrum\" or \"fraunhofer\"");
    }
  }
  p.frame_size = square_shape(j, "frame_shape", p.frame_size);
  p.object_size = square_shape(j, "object_shape", p.object_size);

  if (j.contains("probe")) {
    const Json& probe = j["probe"];
    only_keys(probe, "probe", {"kind"});
    std::string kind = "aperture";
    read(probe, "kind", kind);
    if (kind == "aperture") {
      p.probe = ProbeKind::Aperture;
    } else if (kind == "focused_gaussian") {
      p.probe = ProbeKind::FocusedGaussian;
    } else {
      config_error("probe.kind must be \"aperture\" or \"focused_gaussian\"");
    }
  }
  if (j.contains("trajectory")) {
    const Json& t = j["trajectory"];
    only_keys(t, "trajectory", {"kind", "overlap", "num_positions"});
    std::string kind = "poisson_disk";
    read(t, "kind", kind);
    if (kind == "poisson_disk") {
      p.trajectory.kind = TrajectoryKind::PoissonDisk;
    } else if (kind == "concentric") {
      p.trajectory.kind = TrajectoryKind::Concentric;
    } else if (kind == "raster_jittered") {
      p.trajectory.kind = TrajectoryKind::RasterJittered;
    } else {
      config_error("trajectory.kind must be poisson_disk, concentric or raster_jittered");
    }
    read(t, "overlap", p.trajectory.overlap);
    read(t, "num_positions", p.trajectory.num_positions);
  }
  if (j.contains("noise")) {
    const Json& n = j["noise"];
    only_keys(n, "noise", {"photon_scale", "gaussian_sigma", "shot_noise", "bit_depth"});
    read(n, "photon_scale", p.noise.photon_scale);
    read(n, "gaussian_sigma", p.noise.gaussian_sigma);
    read(n, "shot_noise", p.noise.shot_noise);
    if (n.contains("bit_depth")) {
      if (n["bit_depth"].is_null()) {
        p.noise.bit_depth.reset();
      } else {
        int bits = 0;
        read(n, "bit_depth", bits);
        p.noise.bit_depth = bits;
      }
    }
  }
  p.trajectory.probe_diameter = p.probe_diameter();

  for (const char* name : {"epie", "mpie"}) {
    if (!j.contains(name)) continue;
    const Json& b = j[name];
    only_keys(b, name, {"alpha_obj", "beta_probe", "reg_alpha", "friction", "momentum_gain",
                        "probe_update_enabled", "probe_start_epoch", "seed"});
    read(b, "alpha_obj", cfg.pie.alpha_obj);
    read(b, "beta_probe", cfg.pie.beta_probe);
    read(b, "reg_alpha", cfg.pie.reg_alpha);
    read(b, "friction", cfg.pie.friction);
    read(b, "momentum_gain", cfg.pie.momentum_gain);
    read(b, "probe_update_enabled", cfg.pie.probe_update_enabled);
    read(b, "probe_start_epoch", cfg.pie.probe_start_epoch);
    read(b, "seed", cfg.pie.seed);
  }
  if (j.contains("adam")) {
    const Json& b = j["adam"];
    only_keys(b, "adam", {"lr_object", "lr_probe", "lr_z", "train_object", "train_probe", "train_z", "batch_size",
                          "beta1", "beta2", "epsilon", "seed"});
    read(b, "lr_object", cfg.adam.lr_object);
    read(b, "lr_probe", cfg.adam.lr_probe);
    read(b, "lr_z", cfg.adam.lr_z);
    read(b, "train_object", cfg.adam.train_object);
    read(b, "train_probe", cfg.adam.train_probe);
    read(b, "train_z", cfg.adam.train_z);
    read(b, "batch_size", cfg.adam.batch_size);
    read(b, "beta1", cfg.adam.beta1);
    read(b, "beta2", cfg.adam.beta2);
    read(b, "epsilon", cfg.adam.epsilon);
    read(b, "seed", cfg.adam.seed);
  }
  try {
    p.geometry();
    p.noise.validate();
    p.trajectory.validate();
    cfg.pie.validate();
    cfg.adam.validate();
  } catch (const Error& e) {
    config_error(e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    config_error(fmt::format("{}: {}", path.string(), e.what()));
  }
  return parse_run_config(j);
}

}  // namespace ptycho
