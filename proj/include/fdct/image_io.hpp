#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fdct/core.hpp"

namespace fdct {

/// Interleaved 8- or 16-bit PNG samples.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;   // 1 (gray) or 3 (RGB)
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> samples;

  std::uint16_t at(int y, int x, int c = 0) const {
    return samples[(static_cast<size_t>(y) * width + x) * channels + c];
  }
};

struct PngInfo {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
};

/// Reads only the header. Throws IoError if the file is not a readable PNG.
PngInfo read_png_info(const std::filesystem::path& path);

/// Decodes to gray or RGB (alpha dropped, palettes expanded). Throws IoError.
PngImage read_png(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const PngImage& image);

/// 16-bit millimetre depth <-> meters. Values are rounded and clamped to
/// the representable range on write.
DepthMap depth_from_png(const PngImage& png);
PngImage depth_to_png(const DepthMap& depth);

TransparentMask mask_from_png(const PngImage& png);
PngImage mask_to_png(const TransparentMask& mask);

RgbImage rgb_from_png(const PngImage& png);
PngImage rgb_to_png(const RgbImage& rgb);

}  // namespace fdct
