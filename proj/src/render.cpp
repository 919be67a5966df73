#include "ptycho/render.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "ptycho/error.hpp"
#include "ptycho/ptyd.hpp"

namespace ptycho {

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

// HSL with full saturation; hue in turns [0, 1).
std::array<double, 3> hue_color(double hue, double lightness) {
  const double chroma = (1.0 - std::abs(2.0 * lightness - 1.0));
  const double h6 = hue * 6.0;
  const double x = chroma * (1.0 - std::abs(std::fmod(h6, 2.0) - 1.0));
  std::array<double, 3> rgb{};
  switch (static_cast<int>(h6) % 6) {
    case 0: rgb = {chroma, x, 0.0}; break;
    case 1: rgb = {x, chroma, 0.0}; break;
    case 2: rgb = {0.0, chroma, x}; break;
    case 3: rgb = {0.0, x, chroma}; break;
    case 4: rgb = {x, 0.0, chroma}; break;
    default: rgb = {chroma, 0.0, x}; break;
  }
  const double m = lightness - chroma / 2.0;
  for (double& c : rgb) c += m;
  return rgb;
}

double phase_turns(cplx v) {
  // [-pi, pi) mapped onto [0, 1).
  double t = (std::arg(v) + std::numbers::pi) / (2.0 * std::numbers::pi);
  return t >= 1.0 ? 0.0 : t;
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

}  // namespace

Image render_field(const ComplexField& field, RenderMode mode) {
  require_finite(field, "render_field");
  Image image;
  image.width = field.cols();
  image.height = field.rows();
  image.channels = mode == RenderMode::Amplitude ? 1 : 3;
  image.pixels.reserve(field.size() * static_cast<std::size_t>(image.channels));

  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const cplx& v : field) {
    lo = std::min(lo, std::abs(v));
    hi = std::max(hi, std::abs(v));
  }
  for (const cplx& v : field) {
    switch (mode) {
      case RenderMode::Amplitude:
        image.pixels.push_back(hi > lo ? to_byte((std::abs(v) - lo) / (hi - lo)) : 0);
        break;
      case RenderMode::Phase:
        for (double c : hue_color(phase_turns(v), 0.5)) image.pixels.push_back(to_byte(c));
        break;
      case RenderMode::ComplexWheel: {
        const double lightness = hi > 0.0 ? 0.5 * std::abs(v) / hi : 0.0;
        for (double c : hue_color(phase_turns(v), lightness)) image.pixels.push_back(to_byte(c));
        break;
      }
    }
  }
  return image;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorKind::Io, "libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw Error(ErrorKind::Io, "PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_write_to_vector, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = image.width * static_cast<std::size_t>(image.channels);
  for (std::size_t r = 0; r < image.height; ++r) {
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + r * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  write_file_atomic(path, encode_png(image));
}

}  // namespace ptycho
