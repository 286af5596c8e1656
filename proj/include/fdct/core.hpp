#pragma once

#include <algorithm>
#include <array>
#include <string>

#include <Eigen/Core>

#include "fdct/errors.hpp"

namespace fdct {

/// Row-major H x W image plane; element (y, x) is pixel row y, column x.
template <typename Scalar>
using ImagePlane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using BoolPlane = ImagePlane<bool>;

/// Single-channel depth in meters. Missing sensor readings are exactly 0.
struct DepthMap {
  ImagePlane<double> values;

  DepthMap() = default;
  explicit DepthMap(ImagePlane<double> v) : values(std::move(v)) {}
  DepthMap(int height, int width, double fill = 0.0)
      : values(ImagePlane<double>::Constant(height, width, fill)) {}

  int height() const { return static_cast<int>(values.rows()); }
  int width() const { return static_cast<int>(values.cols()); }
  double operator()(int y, int x) const { return values(y, x); }
  double& operator()(int y, int x) { return values(y, x); }
};

/// Three planes (R, G, B) of values in [0, 1].
struct RgbImage {
  std::array<ImagePlane<double>, 3> channels;

  RgbImage() = default;
  RgbImage(int height, int width, double fill = 0.0) {
    for (auto& c : channels) c = ImagePlane<double>::Constant(height, width, fill);
  }

  int height() const { return static_cast<int>(channels[0].rows()); }
  int width() const { return static_cast<int>(channels[0].cols()); }
};

/// true marks a pixel that belongs to a transparent object.
struct TransparentMask {
  BoolPlane values;

  TransparentMask() = default;
  explicit TransparentMask(BoolPlane v) : values(std::move(v)) {}
  TransparentMask(int height, int width, bool fill = false)
      : values(BoolPlane::Constant(height, width, fill)) {}

  int height() const { return static_cast<int>(values.rows()); }
  int width() const { return static_cast<int>(values.cols()); }
  bool operator()(int y, int x) const { return values(y, x); }
  bool& operator()(int y, int x) { return values(y, x); }
  long count() const { return values.count(); }
};

struct Sample {
  RgbImage rgb;
  DepthMap raw_depth;
  DepthMap gt_depth;
  TransparentMask mask;
  std::string id;

  int height() const { return gt_depth.height(); }
  int width() const { return gt_depth.width(); }
};

/// Throws DimensionError unless all four images share one shape.
void check_sample_shape(const Sample& s);

/// Ground-truth depth interval in meters that counts toward losses and metrics.
struct ValidRange {
  double lo = 0.3;
  double hi = 1.5;

  void validate() const;
};

/// Elementwise AND of `mask` with lo <= gt <= hi.
TransparentMask valid_pixels(const DepthMap& gt, const TransparentMask& mask,
                             const ValidRange& range = {});

/// values / depth_max clipped to [0, 1]; missing (0) stays 0.
ImagePlane<double> normalize_depth(const DepthMap& d, double depth_max);

/// Unit surface normals, stored as three planes (nx, ny, nz).
struct NormalMap {
  std::array<ImagePlane<double>, 3> components;
  int height() const { return static_cast<int>(components[0].rows()); }
  int width() const { return static_cast<int>(components[0].cols()); }
};

/// Image-space depth gradient: central differences in the interior,
/// one-sided at the borders, unit pixel spacing.
void depth_gradients(const ImagePlane<double>& d, ImagePlane<double>& gx, ImagePlane<double>& gy);

/// Normals (-gx, -gy, 1) / |(-gx, -gy, 1)| from image-space gradients.
NormalMap normals_from_depth(const DepthMap& d);

bool all_finite(const DepthMap& d);

/// Keeps large feature-map buffers on the heap between steps (glibc only;
/// no-op elsewhere). Call once from an executable's main.
void tune_allocator();

}  // namespace fdct

namespace fdct {

/// Nearest-neighbour resize; the output only contains values present in `src`.
template <typename T>
ImagePlane<T> resize_nearest(const ImagePlane<T>& src, int height, int width) {
  if (src.rows() == height && src.cols() == width) return src;
  ImagePlane<T> out(height, width);
  const double sy = static_cast<double>(src.rows()) / height;
  const double sx = static_cast<double>(src.cols()) / width;
  for (int y = 0; y < height; ++y) {
    const auto iy = std::min<Eigen::Index>(static_cast<Eigen::Index>(y * sy), src.rows() - 1);
    for (int x = 0; x < width; ++x) {
      const auto ix = std::min<Eigen::Index>(static_cast<Eigen::Index>(x * sx), src.cols() - 1);
      out(y, x) = src(iy, ix);
    }
  }
  return out;
}

/// Bilinear resize with half-pixel centres and edge clamping.
ImagePlane<double> resize_bilinear(const ImagePlane<double>& src, int height, int width);

}  // namespace fdct
