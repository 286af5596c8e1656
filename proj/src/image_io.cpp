#include "fdct/image_io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

namespace fdct {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  return f;
}

void check_signature(std::FILE* f, const std::filesystem::path& path) {
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("'" + path.string() + "' is not a PNG file");
  }
}

void silent_warning(png_structp, png_const_charp) {}

[[noreturn]] void silent_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }

struct ReadContext {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~ReadContext() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

}  // namespace

PngInfo read_png_info(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  check_signature(f.get(), path);
  ReadContext ctx;
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, silent_error, silent_warning);
  ctx.info = ctx.png ? png_create_info_struct(ctx.png) : nullptr;
  if (!ctx.info) throw IoError("libpng initialisation failed");
  if (setjmp(png_jmpbuf(ctx.png))) throw IoError("corrupt PNG header in '" + path.string() + "'");
  png_init_io(ctx.png, f.get());
  png_set_sig_bytes(ctx.png, 8);
  png_read_info(ctx.png, ctx.info);
  PngInfo info;
  info.width = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
  info.height = static_cast<int>(png_get_image_height(ctx.png, ctx.info));
  info.bit_depth = png_get_bit_depth(ctx.png, ctx.info);
  info.channels = png_get_channels(ctx.png, ctx.info);
  return info;
}

PngImage read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  check_signature(f.get(), path);
  ReadContext ctx;
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, silent_error, silent_warning);
  ctx.info = ctx.png ? png_create_info_struct(ctx.png) : nullptr;
  if (!ctx.info) throw IoError("libpng initialisation failed");

  PngImage img;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(ctx.png))) throw IoError("corrupt PNG data in '" + path.string() + "'");
  png_init_io(ctx.png, f.get());
  png_set_sig_bytes(ctx.png, 8);
  png_read_info(ctx.png, ctx.info);

  const int color = png_get_color_type(ctx.png, ctx.info);
  int depth = png_get_bit_depth(ctx.png, ctx.info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(ctx.png);
  if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png), png_set_strip_alpha(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  img.width = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
  img.height = static_cast<int>(png_get_image_height(ctx.png, ctx.info));
  img.channels = png_get_channels(ctx.png, ctx.info);
  depth = png_get_bit_depth(ctx.png, ctx.info);
  img.bit_depth = depth;
  if (img.channels != 1 && img.channels != 3) throw IoError("unsupported channel layout in '" + path.string() + "'");

  const size_t row_bytes = png_get_rowbytes(ctx.png, ctx.info);
  buffer.resize(row_bytes * static_cast<size_t>(img.height));
  rows.resize(static_cast<size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[static_cast<size_t>(y)] = buffer.data() + row_bytes * y;
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, nullptr);

  const size_t stride = static_cast<size_t>(img.width) * img.channels;
  img.samples.resize(stride * static_cast<size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    const png_byte* src = rows[static_cast<size_t>(y)];
    std::uint16_t* dst = img.samples.data() + y * stride;
    for (size_t i = 0; i < stride; ++i) {
      dst[i] = depth == 16 ? static_cast<std::uint16_t>((src[2 * i] << 8) | src[2 * i + 1]) : src[i];
    }
  }
  return img;
}

void write_png(const std::filesystem::path& path, const PngImage& image) {
  if (image.channels != 1 && image.channels != 3) throw IoError("write_png: unsupported channel count");
  if (image.bit_depth != 8 && image.bit_depth != 16) throw IoError("write_png: unsupported bit depth");
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, silent_error, silent_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  struct Guard {
    png_structp& p;
    png_infop& i;
    ~Guard() { png_destroy_write_struct(&p, &i); }
  } guard{png, info};
  if (!info) throw IoError("libpng initialisation failed");

  const size_t stride = static_cast<size_t>(image.width) * image.channels * (image.bit_depth / 8);
  std::vector<png_byte> buffer(stride * static_cast<size_t>(image.height));
  const size_t n = static_cast<size_t>(image.width) * image.height * image.channels;
  for (size_t i = 0; i < n; ++i) {
    if (image.bit_depth == 16) {
      buffer[2 * i] = static_cast<png_byte>(image.samples[i] >> 8);
      buffer[2 * i + 1] = static_cast<png_byte>(image.samples[i] & 0xff);
    } else {
      buffer[i] = static_cast<png_byte>(image.samples[i]);
    }
  }
  std::vector<png_bytep> rows(static_cast<size_t>(image.height));
  for (int y = 0; y < image.height; ++y) rows[static_cast<size_t>(y)] = buffer.data() + stride * y;

  if (setjmp(png_jmpbuf(png))) throw IoError("failed writing PNG '" + path.string() + "'");
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height),
               image.bit_depth, image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
}

DepthMap depth_from_png(const PngImage& png) {
  if (png.channels != 1) throw IoError("depth PNG must be single-channel");
  DepthMap d(png.height, png.width);
  for (int y = 0; y < png.height; ++y) {
    for (int x = 0; x < png.width; ++x) d(y, x) = png.at(y, x) / 1000.0;
  }
  return d;
}

PngImage depth_to_png(const DepthMap& depth) {
  PngImage png{depth.width(), depth.height(), 1, 16, {}};
  png.samples.resize(static_cast<size_t>(depth.width()) * depth.height());
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double mm = std::round(depth(y, x) * 1000.0);
      png.samples[static_cast<size_t>(y) * depth.width() + x] = static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
    }
  }
  return png;
}

TransparentMask mask_from_png(const PngImage& png) {
  TransparentMask m(png.height, png.width);
  for (int y = 0; y < png.height; ++y) {
    for (int x = 0; x < png.width; ++x) {
      bool on = false;
      for (int c = 0; c < png.channels; ++c) on = on || png.at(y, x, c) != 0;
      m(y, x) = on;
    }
  }
  return m;
}

PngImage mask_to_png(const TransparentMask& mask) {
  PngImage png{mask.width(), mask.height(), 1, 8, {}};
  png.samples.resize(static_cast<size_t>(mask.width()) * mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) png.samples[static_cast<size_t>(y) * mask.width() + x] = mask(y, x) ? 255 : 0;
  }
  return png;
}

RgbImage rgb_from_png(const PngImage& png) {
  RgbImage rgb(png.height, png.width);
  const double scale = png.bit_depth == 16 ? 65535.0 : 255.0;
  for (int y = 0; y < png.height; ++y) {
    for (int x = 0; x < png.width; ++x) {
      for (int c = 0; c < 3; ++c) rgb.channels[c](y, x) = png.at(y, x, png.channels == 3 ? c : 0) / scale;
    }
  }
  return rgb;
}

PngImage rgb_to_png(const RgbImage& rgb) {
  PngImage png{rgb.width(), rgb.height(), 3, 8, {}};
  png.samples.resize(static_cast<size_t>(rgb.width()) * rgb.height() * 3);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::round(std::clamp(rgb.channels[c](y, x), 0.0, 1.0) * 255.0);
        png.samples[(static_cast<size_t>(y) * rgb.width() + x) * 3 + c] = static_cast<std::uint16_t>(v);
      }
    }
  }
  return png;
}

}  // namespace fdct
