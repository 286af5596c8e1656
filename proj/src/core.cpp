#include "fdct/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace fdct {

namespace {

std::string shape_str(int h, int w) {
  std::ostringstream os;
  os << h << "x" << w;
  return os.str();
}

}  // namespace

void check_sample_shape(const Sample& s) {
  const int h = s.gt_depth.height(), w = s.gt_depth.width();
  auto same = [&](int hh, int ww) { return hh == h && ww == w; };
  if (!same(s.raw_depth.height(), s.raw_depth.width()) || !same(s.mask.height(), s.mask.width()) ||
      !same(s.rgb.height(), s.rgb.width())) {
    throw DimensionError("sample '" + s.id + "': image shapes disagree (gt " + shape_str(h, w) +
                         ", raw " + shape_str(s.raw_depth.height(), s.raw_depth.width()) + ", mask " +
                         shape_str(s.mask.height(), s.mask.width()) + ", rgb " +
                         shape_str(s.rgb.height(), s.rgb.width()) + ")");
  }
}

void ValidRange::validate() const {
  if (!(lo > 0.0 && lo < hi)) throw ConfigError("valid range requires 0 < lo < hi");
}

TransparentMask valid_pixels(const DepthMap& gt, const TransparentMask& mask, const ValidRange& range) {
  if (gt.height() != mask.height() || gt.width() != mask.width()) {
    throw DimensionError("valid_pixels: depth " + shape_str(gt.height(), gt.width()) + " vs mask " +
                         shape_str(mask.height(), mask.width()));
  }
  return TransparentMask(mask.values && (gt.values >= range.lo) && (gt.values <= range.hi));
}

ImagePlane<double> normalize_depth(const DepthMap& d, double depth_max) {
  if (!(depth_max > 0.0)) throw ConfigError("depth_max must be positive");
  return (d.values / depth_max).max(0.0).min(1.0);
}

void depth_gradients(const ImagePlane<double>& d, ImagePlane<double>& gx, ImagePlane<double>& gy) {
  const Eigen::Index h = d.rows(), w = d.cols();
  gx.setZero(h, w);
  gy.setZero(h, w);
  if (w >= 2) {
    for (Eigen::Index y = 0; y < h; ++y) {
      gx(y, 0) = d(y, 1) - d(y, 0);
      for (Eigen::Index x = 1; x + 1 < w; ++x) gx(y, x) = 0.5 * (d(y, x + 1) - d(y, x - 1));
      gx(y, w - 1) = d(y, w - 1) - d(y, w - 2);
    }
  }
  if (h >= 2) {
    for (Eigen::Index x = 0; x < w; ++x) {
      gy(0, x) = d(1, x) - d(0, x);
      for (Eigen::Index y = 1; y + 1 < h; ++y) gy(y, x) = 0.5 * (d(y + 1, x) - d(y - 1, x));
      gy(h - 1, x) = d(h - 1, x) - d(h - 2, x);
    }
  }
}

NormalMap normals_from_depth(const DepthMap& d) {
  ImagePlane<double> gx, gy;
  depth_gradients(d.values, gx, gy);
  const ImagePlane<double> inv_norm = (gx.square() + gy.square() + 1.0).sqrt().inverse();
  NormalMap n;
  n.components[0] = -gx * inv_norm;
  n.components[1] = -gy * inv_norm;
  n.components[2] = inv_norm;
  return n;
}

bool all_finite(const DepthMap& d) { return d.values.allFinite(); }

}  // namespace fdct

namespace fdct {

ImagePlane<double> resize_bilinear(const ImagePlane<double>& src, int height, int width) {
  if (src.rows() == height && src.cols() == width) return src;
  ImagePlane<double> out(height, width);
  const double sy = static_cast<double>(src.rows()) / height;
  const double sx = static_cast<double>(src.cols()) / width;
  const auto max_y = static_cast<double>(src.rows() - 1), max_x = static_cast<double>(src.cols() - 1);
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<Eigen::Index>(fy);
    const auto y1 = std::min<Eigen::Index>(y0 + 1, src.rows() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x0 = static_cast<Eigen::Index>(fx);
      const auto x1 = std::min<Eigen::Index>(x0 + 1, src.cols() - 1);
      const double wx = fx - x0;
      out(y, x) = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
                  wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
    }
  }
  return out;
}

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace fdct
