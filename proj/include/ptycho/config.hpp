#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>

#include "ptycho/ad_solver.hpp"
#include "ptycho/pie.hpp"
#include "ptycho/simulate.hpp"

namespace ptycho {

/// Run configuration: the dataset header keys (wavelength_m, z_m,
/// detector_pitch_m, propagator, frame_shape, object_shape) plus "preset",
/// "seed", "probe", "trajectory", "noise" and per-solver blocks "epie",
/// "mpie", "adam". Every key is optional; absent keys keep the defaults.
struct RunConfig {
  SimulationPreset preset = SimulationPreset::desk();
  std::uint64_t seed = 0;
  PieConfig pie;
  AdConfig adam;
};

/// Throws BadHeader on unknown keys or wrongly typed values.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ptycho
