#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ptycho/fields.hpp"

namespace ptycho {

enum class RenderMode { Amplitude, Phase, ComplexWheel };

/// 8-bit image, row-major, 1 (gray) or 3 (RGB) channels.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;
};

/// Amplitude: gray scaled linearly over [min, max] (a flat field maps to 0).
/// Phase: cyclic hue over [-pi, pi). ComplexWheel: hue = phase, lightness =
/// amplitude / max amplitude.
Image render_field(const ComplexField& field, RenderMode mode);

std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace ptycho
