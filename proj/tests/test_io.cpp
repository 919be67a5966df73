#include <doctest.h>
#include <zlib.h>

#include <cmath>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>

#include "helpers.hpp"
#include "ptycho/config.hpp"
#include "ptycho/convergence.hpp"
#include "ptycho/error.hpp"
#include "ptycho/ptyd.hpp"
#include "ptycho/render.hpp"

using namespace ptycho;
using testing_support::small_instance;
using Bytes = std::vector<std::uint8_t>;

namespace {

constexpr std::size_t kPreamble = 6 + 8;

PtydFile sample_file(FrameDtype dtype = FrameDtype::F32) {
  auto in = small_instance(16, 3, PropagatorKind::AngularSpectrum, 31, 0.2);
  normalize(in.dataset);
  in.dataset.noise_json = R"({"photon_scale":300.0})";
  PtydFile f;
  f.dataset = in.dataset;
  f.frame_dtype = dtype;
  f.fields.emplace("truth_object", in.truth.object);
  f.fields.emplace("truth_probe", in.truth.probe);
  return f;
}

// Rewrites the header through `edit` and restores a valid checksum, so only
// the semantic check under test can reject the result.
template <typename Edit>
Bytes reseal(const Bytes& bytes, Edit edit) {
  const std::string text = ptyd_header_text(bytes);
  auto h = nlohmann::ordered_json::parse(text);
  h.erase("header_crc32");
  edit(h);
  const std::string unsigned_text = h.dump();
  h["header_crc32"] = crc32(0L, reinterpret_cast<const Bytef*>(unsigned_text.data()),
                            static_cast<uInt>(unsigned_text.size()));
  const std::string out_text = h.dump();
  Bytes out(bytes.begin(), bytes.begin() + 6);
  const std::uint64_t len = out_text.size();
  const auto* lp = reinterpret_cast<const std::uint8_t*>(&len);
  out.insert(out.end(), lp, lp + 8);
  out.insert(out.end(), out_text.begin(), out_text.end());
  out.insert(out.end(), bytes.begin() + static_cast<long>(kPreamble + text.size()), bytes.end());
  return out;
}

ErrorKind parse_error_kind(const Bytes& bytes) {
  try {
    parse_ptyd(bytes);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("parse succeeded");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("PTYD round trip is byte-exact") {
  for (auto dtype : {FrameDtype::F32, FrameDtype::F64}) {
    const auto f = sample_file(dtype);
    const auto bytes = serialize_ptyd(f);
    const auto back = parse_ptyd(bytes);
    CHECK(serialize_ptyd(back) == bytes);
    CHECK(back.fields.at("truth_object") == f.fields.at("truth_object"));
    CHECK(back.dataset.positions.size() == 3);
    CHECK(back.dataset.normalized);
    CHECK(back.dataset.geometry.z == f.dataset.geometry.z);
    if (dtype == FrameDtype::F64) {
      CHECK(back.dataset.frames[2] == f.dataset.frames[2]);
    } else {
      for (std::size_t k = 0; k < 256; ++k)
        CHECK(back.dataset.frames[1][k] == static_cast<double>(static_cast<float>(f.dataset.frames[1][k])));
    }
  }
}

TEST_CASE("state files carry z and epoch") {
  auto f = sample_file();
  f.has_frames = false;
  f.z_estimate = 0.0349;
  f.epoch = 17;
  const auto back = parse_ptyd(serialize_ptyd(f));
  CHECK(!back.has_frames);
  CHECK(back.z_estimate == 0.0349);
  CHECK(back.epoch == 17);
  CHECK(back.dataset.frames.empty());
}

TEST_CASE("files on disk") {
  const auto dir = std::filesystem::temp_directory_path() / "ptycho_io_test";
  std::filesystem::create_directories(dir);
  const auto f = sample_file();
  write_dataset(dir / "a.ptyd", f.dataset);
  const auto ds = read_dataset(dir / "a.ptyd");
  CHECK(ds.positions.size() == f.dataset.positions.size());
  CHECK_THROWS_AS(read_dataset(dir / "missing.ptyd"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed PTYD input") {
  const auto bytes = serialize_ptyd(sample_file());

  SUBCASE("bad magic") {
    Bytes b = bytes;
    b[4] = 'X';
    CHECK(parse_error_kind(b) == ErrorKind::BadMagic);
  }
  SUBCASE("truncation anywhere") {
    for (std::size_t len : {std::size_t{0}, std::size_t{3}, std::size_t{10}, std::size_t{40}, bytes.size() - 1}) {
      const Bytes b(bytes.begin(), bytes.begin() + static_cast<long>(len));
      const auto kind = parse_error_kind(b);
      CHECK(is_data_error(kind));
    }
    const Bytes b(bytes.begin(), bytes.end() - 8);
    CHECK(parse_error_kind(b) == ErrorKind::Truncated);
  }
  SUBCASE("checksum") {
    Bytes b = bytes;
    const std::string text = ptyd_header_text(b);
    const auto at = text.find("\"z_m\":") + 7;
    b[kPreamble + at] = b[kPreamble + at] == '1' ? '2' : '1';
    CHECK(parse_error_kind(b) == ErrorKind::BadHeader);
  }
  SUBCASE("num_positions disagrees with the listed positions") {
    const auto b = reseal(bytes, [](auto& h) { h["num_positions"] = 4; });
    CHECK(parse_error_kind(b) == ErrorKind::ManifestMismatch);
  }
  SUBCASE("unknown version") {
    const auto b = reseal(bytes, [](auto& h) { h["format_version"] = 2; });
    CHECK(parse_error_kind(b) == ErrorKind::UnknownVersion);
  }
  SUBCASE("manifest offset") {
    const auto b = reseal(bytes, [](auto& h) { h["manifest"][1]["byte_offset"] = 8; });
    CHECK(parse_error_kind(b) == ErrorKind::ManifestMismatch);
  }
  SUBCASE("reseal without edits is accepted") {
    CHECK(reseal(bytes, [](auto&) {}) == bytes);
  }
  SUBCASE("trailing payload bytes") {
    Bytes b = bytes;
    b.push_back(0);
    CHECK(parse_error_kind(b) == ErrorKind::ManifestMismatch);
  }
}

TEST_CASE("rendering") {
  SUBCASE("a constant field renders uniformly") {
    const ComplexField f(8, 8, 1.0, std::polar(0.7, 1.1));
    for (auto mode : {RenderMode::Amplitude, RenderMode::Phase, RenderMode::ComplexWheel}) {
      const auto img = render_field(f, mode);
      CHECK(img.width == 8);
      CHECK(img.height == 8);
      const std::size_t ch = static_cast<std::size_t>(img.channels);
      for (std::size_t k = 0; k < img.pixels.size(); ++k) CHECK(img.pixels[k] == img.pixels[k % ch]);
    }
  }
  SUBCASE("amplitude ignores the phase") {
    auto a = oracle::random_field(8, 8, 3);
    auto b = a;
    for (std::size_t k = 0; k < b.size(); ++k) b[k] = std::abs(a[k]) * std::polar(1.0, 0.37 * static_cast<double>(k));
    CHECK(render_field(a, RenderMode::Amplitude).pixels == render_field(b, RenderMode::Amplitude).pixels);
    const auto img = render_field(a, RenderMode::Amplitude);
    CHECK(img.channels == 1);
    CHECK(*std::max_element(img.pixels.begin(), img.pixels.end()) == 255);
    CHECK(*std::min_element(img.pixels.begin(), img.pixels.end()) == 0);
  }
  SUBCASE("phase colouring is cyclic") {
    const std::size_t n = 64;
    ComplexField ramp(4, n, 1.0);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < n; ++c)
        ramp(r, c) = std::polar(1.0, -std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(c) / n);
    const auto img = render_field(ramp, RenderMode::Phase);
    REQUIRE(img.channels == 3);
    auto dist = [&](std::size_t a, std::size_t b) {
      int d = 0;
      for (int k = 0; k < 3; ++k) d += std::abs(int(img.pixels[3 * a + k]) - int(img.pixels[3 * b + k]));
      return d;
    };
    // first and last columns are neighbours on the colour wheel
    CHECK(dist(0, n - 1) < 40);
    CHECK(dist(0, n / 2) > 200);
    // rows repeat
    CHECK(dist(3, n + 3) == 0);
  }
  SUBCASE("PNG encoding") {
    const auto png = encode_png(render_field(oracle::random_field(6, 10, 4), RenderMode::ComplexWheel));
    const Bytes sig{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    CHECK(Bytes(png.begin(), png.begin() + 8) == sig);
    CHECK(png[19] == 10);  // IHDR width, big endian
    CHECK(png[23] == 6);
  }
}

TEST_CASE("run configuration") {
  const auto cfg = parse_run_config(nlohmann::json::parse(R"({
    "seed": 4, "z_m": 0.02, "propagator": "fraunhofer",
    "noise": {"photon_scale": 1000.0, "bit_depth": null},
    "mpie": {"reg_alpha": 0.5}, "adam": {"lr_object": 0.01}
  })"));
  CHECK(cfg.seed == 4);
  CHECK(cfg.preset.z == 0.02);
  CHECK(cfg.preset.propagator == PropagatorKind::Fraunhofer);
  CHECK(cfg.preset.noise.photon_scale == 1000.0);
  CHECK(!cfg.preset.noise.bit_depth.has_value());
  CHECK(cfg.pie.reg_alpha == 0.5);
  CHECK(cfg.adam.lr_object == 0.01);

  const auto defaults = parse_run_config(nlohmann::json::object());
  CHECK(defaults.preset.frame_size == SimulationPreset::desk().frame_size);
  CHECK(defaults.pie.reg_alpha == PieConfig{}.reg_alpha);

  for (const char* bad : {R"({"sed": 1})", R"({"z_m": "far"})", R"({"preset": "lab"})",
                          R"({"frame_shape": [64, 32]})", R"({"mpie": {"lr": 1}})"}) {
    try {
      parse_run_config(nlohmann::json::parse(bad));
      FAIL("accepted " << bad);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::BadHeader);
    }
  }
}

TEST_CASE("convergence log CSV") {
  ConvergenceLog log;
  log.append({1, 0.5, 0.25, 0.9, 0.8, 0.7, 0.035});
  log.append({2, 1.0, 0.125, std::nan(""), std::nan(""), std::nan(""), 0.035});
  std::ostringstream out;
  log.write_csv(out, true, "");
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,wall_clock_s,loss,corr_abs,corr_amp,corr_phase,z_m");
  std::getline(in, line);
  CHECK(line == "1,0.5,0.25,0.9,0.8,0.7,0.035");
  std::getline(in, line);
  CHECK(line == "2,1,0.125,nan,nan,nan,0.035");

  CHECK(log.at_time(0.7)->epoch == 1);
  CHECK(log.at_time(0.1) == nullptr);
  CHECK(log.peak_corr() == 0.9);
  CHECK_THROWS_AS(log.append({2, 2.0, 0.1}), Error);
  CHECK_THROWS_AS(log.append({3, 0.9, 0.1}), Error);
  CHECK(format_number(0.1) == "0.1");
}
