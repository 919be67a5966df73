#include "ptycho/ptyd.hpp"

#include <fmt/format.h>
#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <random>

#include "ptycho/error.hpp"

namespace ptycho {

static_assert(std::endian::native == std::endian::little, "PTYD payloads are written in host order");

namespace {

using Json = nlohmann::ordered_json;

constexpr std::size_t kMagicSize = sizeof(kPtydMagic) - 1;
constexpr std::size_t kPreamble = kMagicSize + 8;
constexpr std::uint64_t kMaxDim = 1u << 20;

const char* dtype_name(FrameDtype d) { return d == FrameDtype::F32 ? "f32" : "f64"; }
std::size_t dtype_bytes(FrameDtype d) { return d == FrameDtype::F32 ? 4 : 8; }

const char* propagator_name(PropagatorKind k) {
  return k == PropagatorKind::AngularSpectrum ? "angular_spectrum" : "fraunhofer";
}

std::uint32_t crc_of(const std::string& text) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size())));
}

template <typename T>
void append_raw(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T load_raw(const std::uint8_t* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

[[noreturn]] void bad_header(const std::string& what) { throw Error(ErrorKind::BadHeader, "PTYD header: " + what); }

struct Entry {
  std::string name;
  std::string dtype;
  std::vector<std::uint64_t> shape;
  std::uint64_t offset = 0;
  std::uint64_t bytes = 0;
};

Json header_json(const PtydFile& file, const std::vector<Entry>& manifest) {
  const PtychoDataset& d = file.dataset;
  const PtychoGeometry& g = d.geometry;
  Json h;
  h["format_version"] = kPtydVersion;
  h["content"] = file.has_frames ? "dataset" : "state";
  h["wavelength_m"] = g.wavelength;
  h["z_m"] = g.z;
  h["detector_pitch_m"] = g.detector_pitch;
  h["object_pitch_m"] = g.object_pitch;
  h["propagator"] = propagator_name(g.propagator);
  h["frame_shape"] = {g.frame_size, g.frame_size};
  h["object_shape"] = {d.object_rows, d.object_cols};
  h["num_positions"] = d.positions.size();
  Json positions = Json::array();
  for (const auto& p : d.positions) positions.push_back({p.offset_y_m, p.offset_x_m});
  h["positions_m"] = std::move(positions);
  h["frame_dtype"] = dtype_name(file.frame_dtype);
  h["normalization_scale"] = d.normalization_scale;
  h["normalized"] = d.normalized;
  if (!d.noise_json.empty()) h["noise"] = Json::parse(d.noise_json);
  if (!d.rng_json.empty()) h["rng"] = Json::parse(d.rng_json);
  if (file.z_estimate) h["z_estimate_m"] = *file.z_estimate;
  if (file.epoch) h["epoch"] = *file.epoch;
  Json entries = Json::array();
  for (const auto& e : manifest) {
    entries.push_back({{"name", e.name}, {"dtype", e.dtype}, {"shape", e.shape}, {"byte_offset", e.offset}});
  }
  h["manifest"] = std::move(entries);
  return h;
}

std::uint64_t checked_product(const std::vector<std::uint64_t>& shape, std::uint64_t elem_bytes) {
  std::uint64_t total = elem_bytes;
  for (auto dim : shape) {
    if (dim == 0 || dim > kMaxDim) throw Error(ErrorKind::ManifestMismatch, "manifest shape out of range");
    if (total > std::numeric_limits<std::uint64_t>::max() / dim) {
      throw Error(ErrorKind::ManifestMismatch, "manifest entry too large");
    }
    total *= dim;
  }
  return total;
}

template <typename T>
T get_field(const Json& h, const char* key) {
  if (!h.contains(key)) bad_header(fmt::format("missing \"{}\"", key));
  try {
    return h.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    bad_header(fmt::format("\"{}\" has the wrong type", key));
  }
}

double get_number(const Json& h, const char* key) {
  if (!h.contains(key) || !h.at(key).is_number()) bad_header(fmt::format("\"{}\" must be a number", key));
  return h.at(key).get<double>();
}

std::uint64_t get_count(const Json& j, const char* what) {
  if (!j.is_number_unsigned()) bad_header(fmt::format("{} must be a non-negative integer", what));
  return j.get<std::uint64_t>();
}

}  // namespace

std::vector<std::uint8_t> serialize_ptyd(const PtydFile& file) {
  const PtychoDataset& d = file.dataset;
  const std::size_t n = d.geometry.frame_size;
  std::vector<Entry> manifest;
  std::uint64_t offset = 0;
  if (file.has_frames) {
    if (d.frames.size() != d.positions.size()) {
      throw Error(ErrorKind::ManifestMismatch, "frame and position counts differ");
    }
    const std::uint64_t bytes = d.frames.size() * n * n * dtype_bytes(file.frame_dtype);
    manifest.push_back({"frames", dtype_name(file.frame_dtype), {d.frames.size(), n, n}, offset, bytes});
    offset += bytes;
  }
  for (const auto& [name, field] : file.fields) {
    const std::uint64_t bytes = field.size() * 16;
    manifest.push_back({name, "c128", {field.rows(), field.cols()}, offset, bytes});
    offset += bytes;
  }

  Json header = header_json(file, manifest);
  header["header_crc32"] = crc_of(header.dump());
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(kPreamble + text.size() + offset);
  out.insert(out.end(), kPtydMagic, kPtydMagic + kMagicSize);
  append_raw<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  if (file.has_frames) {
    for (const auto& frame : d.frames) {
      if (frame.rows() != n || frame.cols() != n) throw Error(ErrorKind::ShapeMismatch, "frame shape differs");
      for (double v : frame) {
        if (file.frame_dtype == FrameDtype::F32) {
          append_raw(out, static_cast<float>(v));
        } else {
          append_raw(out, v);
        }
      }
    }
  }
  for (const auto& [name, field] : file.fields) {
    for (const cplx& v : field) {
      append_raw(out, v.real());
      append_raw(out, v.imag());
    }
  }
  return out;
}

std::string ptyd_header_text(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagicSize || std::memcmp(bytes.data(), kPtydMagic, kMagicSize) != 0) {
    if (bytes.size() < kMagicSize && std::memcmp(bytes.data(), kPtydMagic, bytes.size()) == 0) {
      throw Error(ErrorKind::Truncated, "PTYD file shorter than its magic");
    }
    throw Error(ErrorKind::BadMagic, "not a PTYD file (bad magic)");
  }
  if (bytes.size() < kPreamble) throw Error(ErrorKind::Truncated, "PTYD file ends inside the header length");
  const auto length = load_raw<std::uint64_t>(bytes.data() + kMagicSize);
  if (length > bytes.size() - kPreamble) {
    throw Error(ErrorKind::Truncated, fmt::format("header length {} exceeds the file", length));
  }
  return std::string(reinterpret_cast<const char*>(bytes.data() + kPreamble), length);
}

PtydFile parse_ptyd(std::span<const std::uint8_t> bytes) {
  const std::string text = ptyd_header_text(bytes);
  Json h;
  try {
    h = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    bad_header(fmt::format("invalid JSON ({})", e.what()));
  }
  if (!h.is_object()) bad_header("not a JSON object");

  // Integrity: the stored text must be the canonical dump and carry its checksum.
  if (!h.contains("header_crc32") || !h["header_crc32"].is_number_unsigned()) bad_header("missing header_crc32");
  const std::uint64_t stored_crc = h["header_crc32"].get<std::uint64_t>();
  if (h.dump() != text) bad_header("header is not in canonical form");
  Json unsigned_header = h;
  unsigned_header.erase("header_crc32");
  if (crc_of(unsigned_header.dump()) != stored_crc) bad_header("checksum mismatch");

  if (!h.contains("format_version") || !h["format_version"].is_number_integer()) bad_header("missing format_version");
  const auto version = h["format_version"].get<std::int64_t>();
  if (version != kPtydVersion) {
    throw Error(ErrorKind::UnknownVersion, fmt::format("unsupported PTYD format_version {}", version));
  }

  PtydFile file;
  PtychoDataset& d = file.dataset;
  const auto content = get_field<std::string>(h, "content");
  if (content != "dataset" && content != "state") bad_header("content must be \"dataset\" or \"state\"");
  file.has_frames = content == "dataset";

  PtychoGeometry& g = d.geometry;
  g.wavelength = get_number(h, "wavelength_m");
  g.z = get_number(h, "z_m");
  g.detector_pitch = get_number(h, "detector_pitch_m");
  g.object_pitch = get_number(h, "object_pitch_m");
  const auto propagator = get_field<std::string>(h, "propagator");
  if (propagator == "angular_spectrum") {
    g.propagator = PropagatorKind::AngularSpectrum;
  } else if (propagator == "fraunhofer") {
    g.propagator = PropagatorKind::Fraunhofer;
  } else {
    bad_header("unknown propagator \"" + propagator + "\"");
  }
  const Json& frame_shape = h.contains("frame_shape") ? h["frame_shape"] : Json();
  if (!frame_shape.is_array() || frame_shape.size() != 2) bad_header("frame_shape must be [N, N]");
  const auto n_rows = get_count(frame_shape[0], "frame_shape");
  if (get_count(frame_shape[1], "frame_shape") != n_rows || n_rows > kMaxDim) bad_header("frames must be square");
  g.frame_size = n_rows;
  try {
    g.validate();
  } catch (const Error& e) {
    bad_header(e.what());
  }
  const Json& object_shape = h.contains("object_shape") ? h["object_shape"] : Json();
  if (!object_shape.is_array() || object_shape.size() != 2) bad_header("object_shape must be [rows, cols]");
  d.object_rows = get_count(object_shape[0], "object_shape");
  d.object_cols = get_count(object_shape[1], "object_shape");

  const auto num_positions = get_count(h.contains("num_positions") ? h["num_positions"] : Json(), "num_positions");
  const Json& positions = h.contains("positions_m") ? h["positions_m"] : Json();
  if (!positions.is_array()) bad_header("positions_m must be an array");
  if (positions.size() != num_positions) {
    throw Error(ErrorKind::ManifestMismatch,
                fmt::format("num_positions is {} but {} positions are listed", num_positions, positions.size()));
  }
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const Json& p = positions[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      bad_header(fmt::format("position {} is not a [y, x] pair", i));
    }
    try {
      d.positions.push_back(make_position(i, p[0].get<double>(), p[1].get<double>(), g.object_pitch));
    } catch (const Error& e) {
      bad_header(e.what());
    }
  }
  for (const auto& p : d.positions) {
    try {
      require_window_inside(d.object_rows, d.object_cols, p, g.frame_size);
    } catch (const Error& e) {
      bad_header(e.what());
    }
  }

  const auto frame_dtype = get_field<std::string>(h, "frame_dtype");
  if (frame_dtype == "f32") {
    file.frame_dtype = FrameDtype::F32;
  } else if (frame_dtype == "f64") {
    file.frame_dtype = FrameDtype::F64;
  } else {
    bad_header("frame_dtype must be f32 or f64");
  }
  d.normalization_scale = get_number(h, "normalization_scale");
  if (!(d.normalization_scale > 0.0)) bad_header("normalization_scale must be positive");
  d.normalized = get_field<bool>(h, "normalized");
  if (h.contains("noise")) d.noise_json = h["noise"].dump();
  if (h.contains("rng")) d.rng_json = h["rng"].dump();
  if (h.contains("z_estimate_m")) file.z_estimate = get_number(h, "z_estimate_m");
  if (h.contains("epoch")) {
    if (!h["epoch"].is_number_integer()) bad_header("epoch must be an integer");
    file.epoch = h["epoch"].get<int>();
  }

  // Manifest: contiguous entries in order, exactly covering the payload.
  const Json& manifest = h.contains("manifest") ? h["manifest"] : Json();
  if (!manifest.is_array()) bad_header("manifest must be an array");
  const std::size_t payload_start = kPreamble + text.size();
  const std::uint64_t payload_size = bytes.size() - payload_start;
  std::uint64_t expected_offset = 0;
  bool saw_frames = false;
  for (const Json& entry : manifest) {
    if (!entry.is_object()) bad_header("manifest entries must be objects");
    Entry e;
    e.name = get_field<std::string>(entry, "name");
    e.dtype = get_field<std::string>(entry, "dtype");
    const Json& shape = entry.contains("shape") ? entry["shape"] : Json();
    if (!shape.is_array()) bad_header("manifest shape must be an array");
    for (const Json& dim : shape) e.shape.push_back(get_count(dim, "manifest shape"));
    e.offset = get_count(entry.contains("byte_offset") ? entry["byte_offset"] : Json(), "byte_offset");
    if (e.offset != expected_offset) {
      throw Error(ErrorKind::ManifestMismatch,
                  fmt::format("entry \"{}\" at offset {} (expected {})", e.name, e.offset, expected_offset));
    }

    if (e.name == "frames") {
      if (saw_frames || !file.has_frames) throw Error(ErrorKind::ManifestMismatch, "unexpected frames entry");
      saw_frames = true;
      if (e.dtype != frame_dtype) throw Error(ErrorKind::ManifestMismatch, "frames dtype differs from frame_dtype");
      if (e.shape.size() != 3 || e.shape[0] != num_positions || e.shape[1] != g.frame_size ||
          e.shape[2] != g.frame_size) {
        throw Error(ErrorKind::ManifestMismatch,
                    fmt::format("frames entry does not match {} positions of {}x{}", num_positions, g.frame_size,
                                g.frame_size));
      }
      e.bytes = checked_product(e.shape, dtype_bytes(file.frame_dtype));
    } else {
      if (e.dtype != "c128" || e.shape.size() != 2) {
        throw Error(ErrorKind::ManifestMismatch, fmt::format("entry \"{}\" must be a 2-D c128 array", e.name));
      }
      if (e.shape[0] % 2 != 0 || e.shape[1] % 2 != 0) {
        throw Error(ErrorKind::ManifestMismatch, fmt::format("entry \"{}\" must have even dimensions", e.name));
      }
      if (file.fields.count(e.name)) throw Error(ErrorKind::ManifestMismatch, "duplicate entry " + e.name);
      e.bytes = checked_product(e.shape, 16);
    }
    if (e.bytes > payload_size - e.offset) {
      throw Error(ErrorKind::Truncated, fmt::format("payload ends inside entry \"{}\"", e.name));
    }

    const std::uint8_t* p = bytes.data() + payload_start + e.offset;
    if (e.name == "frames") {
      const std::size_t n = g.frame_size;
      d.frames.reserve(num_positions);
      for (std::uint64_t i = 0; i < num_positions; ++i) {
        RealArray frame(n, n);
        for (double& v : frame) {
          if (file.frame_dtype == FrameDtype::F32) {
            v = load_raw<float>(p);
            p += 4;
          } else {
            v = load_raw<double>(p);
            p += 8;
          }
        }
        d.frames.push_back(std::move(frame));
      }
    } else {
      ComplexField field(e.shape[0], e.shape[1], g.object_pitch);
      for (cplx& v : field) {
        v = cplx(load_raw<double>(p), load_raw<double>(p + 8));
        p += 16;
      }
      file.fields.emplace(e.name, std::move(field));
    }
    expected_offset = e.offset + e.bytes;
  }
  if (file.has_frames && !saw_frames) throw Error(ErrorKind::ManifestMismatch, "dataset without a frames entry");
  if (expected_offset != payload_size) {
    throw Error(ErrorKind::ManifestMismatch,
                fmt::format("{} payload bytes beyond the manifest", payload_size - expected_offset));
  }
  if (file.has_frames) {
    try {
      d.validate();
    } catch (const Error& e) {
      throw Error(ErrorKind::ManifestMismatch, e.what());
    }
  }
  return file;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::random_device entropy;
  const auto tmp = std::filesystem::path(path).concat(fmt::format(".tmp{:08x}", entropy()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out.flush()) {
      std::filesystem::remove(tmp);
      throw Error(ErrorKind::Io, "failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorKind::Io, fmt::format("cannot rename to {}: {}", path.string(), ec.message()));
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_ptyd(const std::filesystem::path& path, const PtydFile& file) {
  write_file_atomic(path, serialize_ptyd(file));
}

PtydFile read_ptyd(const std::filesystem::path& path) { return parse_ptyd(read_file(path)); }

void write_dataset(const std::filesystem::path& path, const PtychoDataset& dataset, FrameDtype dtype) {
  PtydFile file;
  file.dataset = dataset;
  file.frame_dtype = dtype;
  write_ptyd(path, file);
}

PtychoDataset read_dataset(const std::filesystem::path& path) {
  PtydFile file = read_ptyd(path);
  if (!file.has_frames) throw Error(ErrorKind::ManifestMismatch, path.string() + " holds no frames");
  return std::move(file.dataset);
}

}  // namespace ptycho
