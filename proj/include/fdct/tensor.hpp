#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fdct/core.hpp"
#include "fdct/errors.hpp"

namespace fdct {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense C x (H*W) activation tensor. Each channel plane is contiguous and
/// row-major, so a row of `values` is one spatial map.
template <typename Scalar>
struct FeatureMap {
  Matrix<Scalar> values;
  int height = 0;
  int width = 0;
  /// Power-of-two divisor relative to the network input resolution.
  int scale = 1;

  FeatureMap() = default;
  FeatureMap(int channels, int h, int w, int s = 1)
      : values(Matrix<Scalar>::Zero(channels, Eigen::Index(h) * w)), height(h), width(w), scale(s) {}

  int channels() const { return static_cast<int>(values.rows()); }
  Eigen::Index pixels() const { return Eigen::Index(height) * width; }

  Eigen::Map<ImagePlane<Scalar>> plane(int c) { return {values.row(c).data(), height, width}; }
  Eigen::Map<const ImagePlane<Scalar>> plane(int c) const { return {values.row(c).data(), height, width}; }

  bool same_spatial(const FeatureMap& o) const { return height == o.height && width == o.width; }
};

template <typename Scalar>
FeatureMap<Scalar> like(const FeatureMap<Scalar>& ref, int channels) {
  return FeatureMap<Scalar>(channels, ref.height, ref.width, ref.scale);
}

/// One-channel feature map holding `plane`.
template <typename Scalar, typename Derived>
FeatureMap<Scalar> from_plane(const Eigen::ArrayBase<Derived>& plane, int scale = 1) {
  FeatureMap<Scalar> out(1, static_cast<int>(plane.rows()), static_cast<int>(plane.cols()), scale);
  out.plane(0) = plane.template cast<Scalar>();
  return out;
}

template <typename Scalar>
using FeatureRef = std::reference_wrapper<const FeatureMap<Scalar>>;

template <typename Scalar>
FeatureMap<Scalar> concat_channels(const std::vector<FeatureRef<Scalar>>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  const FeatureMap<Scalar>& first = parts.front();
  int total = 0;
  for (const FeatureMap<Scalar>& p : parts) {
    if (!p.same_spatial(first)) {
      throw DimensionError("concat_channels: spatial size " + std::to_string(p.height) + "x" +
                           std::to_string(p.width) + " does not match " + std::to_string(first.height) +
                           "x" + std::to_string(first.width));
    }
    total += p.channels();
  }
  FeatureMap<Scalar> out = like(first, total);
  int row = 0;
  for (const FeatureMap<Scalar>& p : parts) {
    out.values.middleRows(row, p.channels()) = p.values;
    row += p.channels();
  }
  return out;
}

/// Rows [first, first + count) of `grad` as a feature map.
template <typename Scalar>
FeatureMap<Scalar> slice_channels(const FeatureMap<Scalar>& grad, int first, int count) {
  FeatureMap<Scalar> out = like(grad, count);
  out.values = grad.values.middleRows(first, count);
  return out;
}

template <typename Scalar>
void relu_inplace(FeatureMap<Scalar>& x) {
  x.values = x.values.cwiseMax(Scalar(0));
}

/// Gradient through a ReLU given its output.
template <typename Scalar>
void relu_backward_inplace(FeatureMap<Scalar>& grad, const FeatureMap<Scalar>& relu_out) {
  grad.values = (relu_out.values.array() > Scalar(0)).select(grad.values, Scalar(0));
}

inline void check_poolable(int h, int w, int factor) {
  if (h % factor != 0 || w % factor != 0) {
    throw DimensionError("pooling by " + std::to_string(factor) + " needs divisible size, got " +
                         std::to_string(h) + "x" + std::to_string(w));
  }
}

/// factor x factor max pooling. `argmax` receives the flat input index of
/// each winner for the backward pass.
template <typename Scalar>
FeatureMap<Scalar> max_pool(const FeatureMap<Scalar>& x, int factor, std::vector<std::int32_t>* argmax = nullptr) {
  check_poolable(x.height, x.width, factor);
  const int oh = x.height / factor, ow = x.width / factor;
  FeatureMap<Scalar> out(x.channels(), oh, ow, x.scale * factor);
  if (argmax) argmax->resize(static_cast<size_t>(x.channels()) * oh * ow);
  for (int c = 0; c < x.channels(); ++c) {
    const Scalar* src = x.values.row(c).data();
    Scalar* dst = out.values.row(c).data();
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        int best = (oy * factor) * x.width + ox * factor;
        for (int dy = 0; dy < factor; ++dy) {
          const int row = (oy * factor + dy) * x.width + ox * factor;
          for (int dx = 0; dx < factor; ++dx) {
            if (src[row + dx] > src[best]) best = row + dx;
          }
        }
        dst[oy * ow + ox] = src[best];
        if (argmax) (*argmax)[(static_cast<size_t>(c) * oh + oy) * ow + ox] = best;
      }
    }
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> max_pool_backward(const FeatureMap<Scalar>& grad, const std::vector<std::int32_t>& argmax,
                                     int factor) {
  FeatureMap<Scalar> out(grad.channels(), grad.height * factor, grad.width * factor,
                         std::max(1, grad.scale / factor));
  const auto per_channel = grad.pixels();
  for (int c = 0; c < grad.channels(); ++c) {
    const Scalar* g = grad.values.row(c).data();
    Scalar* dst = out.values.row(c).data();
    for (Eigen::Index i = 0; i < per_channel; ++i) dst[argmax[c * per_channel + i]] += g[i];
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> avg_pool(const FeatureMap<Scalar>& x, int factor) {
  check_poolable(x.height, x.width, factor);
  const int oh = x.height / factor, ow = x.width / factor;
  FeatureMap<Scalar> out(x.channels(), oh, ow, x.scale * factor);
  const Scalar inv = Scalar(1) / Scalar(factor * factor);
  for (int c = 0; c < x.channels(); ++c) {
    const Scalar* src = x.values.row(c).data();
    Scalar* dst = out.values.row(c).data();
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        Scalar acc = 0;
        for (int dy = 0; dy < factor; ++dy) {
          const int row = (oy * factor + dy) * x.width + ox * factor;
          for (int dx = 0; dx < factor; ++dx) acc += src[row + dx];
        }
        dst[oy * ow + ox] = acc * inv;
      }
    }
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> avg_pool_backward(const FeatureMap<Scalar>& grad, int factor) {
  FeatureMap<Scalar> out(grad.channels(), grad.height * factor, grad.width * factor,
                         std::max(1, grad.scale / factor));
  const Scalar inv = Scalar(1) / Scalar(factor * factor);
  for (int c = 0; c < grad.channels(); ++c) {
    const Scalar* g = grad.values.row(c).data();
    Scalar* dst = out.values.row(c).data();
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) dst[y * out.width + x] = g[(y / factor) * grad.width + x / factor] * inv;
    }
  }
  return out;
}

/// Replicates every pixel into a factor x factor block.
template <typename Scalar>
FeatureMap<Scalar> upsample_nearest(const FeatureMap<Scalar>& x, int factor) {
  FeatureMap<Scalar> out(x.channels(), x.height * factor, x.width * factor, std::max(1, x.scale / factor));
  for (int c = 0; c < x.channels(); ++c) {
    const Scalar* src = x.values.row(c).data();
    Scalar* dst = out.values.row(c).data();
    for (int y = 0; y < out.height; ++y) {
      for (int xx = 0; xx < out.width; ++xx) dst[y * out.width + xx] = src[(y / factor) * x.width + xx / factor];
    }
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> upsample_nearest_backward(const FeatureMap<Scalar>& grad, int factor) {
  check_poolable(grad.height, grad.width, factor);
  FeatureMap<Scalar> out(grad.channels(), grad.height / factor, grad.width / factor, grad.scale * factor);
  for (int c = 0; c < grad.channels(); ++c) {
    const Scalar* g = grad.values.row(c).data();
    Scalar* dst = out.values.row(c).data();
    for (int y = 0; y < grad.height; ++y) {
      for (int x = 0; x < grad.width; ++x) dst[(y / factor) * out.width + x / factor] += g[y * grad.width + x];
    }
  }
  return out;
}

/// Depth-to-space: channel c * r^2 + (dy * r + dx) lands on channel c at
/// (r * y + dy, r * x + dx).
template <typename Scalar>
FeatureMap<Scalar> pixel_shuffle(const FeatureMap<Scalar>& x, int r) {
  if (x.channels() % (r * r) != 0) {
    throw DimensionError("pixel_shuffle: " + std::to_string(x.channels()) + " channels not divisible by " +
                         std::to_string(r * r));
  }
  const int oc = x.channels() / (r * r);
  FeatureMap<Scalar> out(oc, x.height * r, x.width * r, std::max(1, x.scale / r));
  for (int c = 0; c < oc; ++c) {
    Scalar* dst = out.values.row(c).data();
    for (int dy = 0; dy < r; ++dy) {
      for (int dx = 0; dx < r; ++dx) {
        const Scalar* src = x.values.row(c * r * r + dy * r + dx).data();
        for (int y = 0; y < x.height; ++y) {
          for (int xx = 0; xx < x.width; ++xx) dst[(y * r + dy) * out.width + xx * r + dx] = src[y * x.width + xx];
        }
      }
    }
  }
  return out;
}

/// Space-to-depth; the exact inverse (and adjoint) of pixel_shuffle.
template <typename Scalar>
FeatureMap<Scalar> pixel_unshuffle(const FeatureMap<Scalar>& x, int r) {
  check_poolable(x.height, x.width, r);
  const int oh = x.height / r, ow = x.width / r;
  FeatureMap<Scalar> out(x.channels() * r * r, oh, ow, x.scale * r);
  for (int c = 0; c < x.channels(); ++c) {
    const Scalar* src = x.values.row(c).data();
    for (int dy = 0; dy < r; ++dy) {
      for (int dx = 0; dx < r; ++dx) {
        Scalar* dst = out.values.row(c * r * r + dy * r + dx).data();
        for (int y = 0; y < oh; ++y) {
          for (int xx = 0; xx < ow; ++xx) dst[y * ow + xx] = src[(y * r + dy) * x.width + xx * r + dx];
        }
      }
    }
  }
  return out;
}

}  // namespace fdct
