#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptycho/model.hpp"

namespace ptycho {

enum class FrameDtype { F32, F64 };

/// In-memory view of a PTYD file: a dataset (frames optional for state files)
/// plus named complex arrays such as "object", "probe", "truth_object".
struct PtydFile {
  PtychoDataset dataset;
  bool has_frames = true;
  FrameDtype frame_dtype = FrameDtype::F32;
  std::map<std::string, ComplexField> fields;
  std::optional<double> z_estimate;  // reconstruction states only
  std::optional<int> epoch;
};

inline constexpr char kPtydMagic[] = "PTYD1\n";
inline constexpr int kPtydVersion = 1;

/// Exact byte image of a file. Frames are rounded to the requested dtype, so
/// parse(serialize(x)) re-serializes to the same bytes.
std::vector<std::uint8_t> serialize_ptyd(const PtydFile& file);

/// Throws BadMagic, Truncated, BadHeader, UnknownVersion or ManifestMismatch.
PtydFile parse_ptyd(std::span<const std::uint8_t> bytes);

/// Header JSON text exactly as stored.
std::string ptyd_header_text(std::span<const std::uint8_t> bytes);

/// Atomic: writes a temporary file next to `path` and renames it.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

void write_ptyd(const std::filesystem::path& path, const PtydFile& file);
PtydFile read_ptyd(const std::filesystem::path& path);

/// Convenience wrappers for the common contents.
void write_dataset(const std::filesystem::path& path, const PtychoDataset& dataset,
                   FrameDtype dtype = FrameDtype::F32);
PtychoDataset read_dataset(const std::filesystem::path& path);

}  // namespace ptycho
