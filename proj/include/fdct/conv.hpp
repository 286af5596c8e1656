#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fdct/tensor.hpp"

namespace fdct {

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  /// Standard deviation of the normal initialiser; 0 means zero-initialised.
  double init_std = 0.0;

  Eigen::Index size() const { return value.size(); }
};

/// Flat, ordered collection of every trainable array in a network.
template <typename Scalar>
class ParameterStore {
 public:
  int add(std::string name, Eigen::Index rows, Eigen::Index cols, double init_std) {
    params_.push_back({std::move(name), Matrix<Scalar>::Zero(rows, cols), init_std});
    return static_cast<int>(params_.size()) - 1;
  }

  const Parameter<Scalar>& operator[](int i) const { return params_[static_cast<size_t>(i)]; }
  Parameter<Scalar>& operator[](int i) { return params_[static_cast<size_t>(i)]; }
  int size() const { return static_cast<int>(params_.size()); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }

  long scalar_count() const {
    long n = 0;
    for (const auto& p : params_) n += static_cast<long>(p.size());
    return n;
  }

  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& p : params_) {
      if (p.init_std <= 0.0) {
        p.value.setZero();
        continue;
      }
      std::normal_distribution<double> dist(0.0, p.init_std);
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<Scalar>(dist(rng));
    }
  }

  /// Zeroed arrays shaped like every parameter, in store order.
  std::vector<Matrix<Scalar>> zeros_like() const {
    std::vector<Matrix<Scalar>> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
    return out;
  }

 private:
  std::vector<Parameter<Scalar>> params_;
};

template <typename Scalar>
using GradientSet = std::vector<Matrix<Scalar>>;

enum class Activation { linear, relu };

/// Unpacks the k x k patches of output rows [oy0, oy1) into `dst`, a
/// (C*k*k) x ((oy1 - oy0) * ow) row-major block with leading dimension `ld`.
/// Row index is (c * k + ky) * k + kx, matching the weight layout of Conv2d.
template <typename Scalar>
void im2col(const FeatureMap<Scalar>& x, int k, int stride, int pad, int oy0, int oy1, int ow, Scalar* dst,
            Eigen::Index ld) {
  for (int c = 0; c < x.channels(); ++c) {
    const Scalar* src = x.values.row(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Scalar* row = dst + ((Eigen::Index(c) * k + ky) * k + kx) * ld;
        const int lo = stride == 1 ? std::max(0, pad - kx) : 0;
        const int hi = stride == 1 ? std::max(lo, std::min(ow, x.width + pad - kx)) : 0;
        for (int oy = oy0; oy < oy1; ++oy) {
          Scalar* drow = row + Eigen::Index(oy - oy0) * ow;
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= x.height) {
            std::fill(drow, drow + ow, Scalar(0));
            continue;
          }
          const Scalar* srow = src + Eigen::Index(iy) * x.width;
          if (stride == 1) {
            std::fill(drow, drow + lo, Scalar(0));
            std::copy(srow + lo - pad + kx, srow + hi - pad + kx, drow + lo);
            std::fill(drow + hi, drow + ow, Scalar(0));
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - pad + kx;
              drow[ox] = (ix >= 0 && ix < x.width) ? srow[ix] : Scalar(0);
            }
          }
        }
      }
    }
  }
}

/// Whole-image im2col into a (C*k*k) x (oh*ow) matrix.
template <typename Scalar>
void im2col(const FeatureMap<Scalar>& x, int k, int stride, int pad, int oh, int ow, Matrix<Scalar>& cols) {
  cols.resize(Eigen::Index(x.channels()) * k * k, Eigen::Index(oh) * ow);
  im2col(x, k, stride, pad, 0, oh, ow, cols.data(), cols.cols());
}

/// Adjoint of im2col for output rows [oy0, oy1): scatters column gradients
/// back onto the input grid, accumulating into `dx`.
template <typename Scalar>
void col2im(const Scalar* cols, Eigen::Index ld, int k, int stride, int pad, int oy0, int oy1, int ow,
            FeatureMap<Scalar>& dx) {
  for (int c = 0; c < dx.channels(); ++c) {
    Scalar* dst = dx.values.row(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Scalar* row = cols + ((Eigen::Index(c) * k + ky) * k + kx) * ld;
        const int lo = stride == 1 ? std::max(0, pad - kx) : 0;
        const int hi = stride == 1 ? std::max(lo, std::min(ow, dx.width + pad - kx)) : 0;
        for (int oy = oy0; oy < oy1; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= dx.height) continue;
          Scalar* drow = dst + Eigen::Index(iy) * dx.width;
          const Scalar* srow = row + Eigen::Index(oy - oy0) * ow;
          if (stride == 1) {
            Scalar* d = drow - pad + kx;
            for (int ox = lo; ox < hi; ++ox) d[ox] += srow[ox];
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - pad + kx;
              if (ix >= 0 && ix < dx.width) drow[ix] += srow[ox];
            }
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const Matrix<Scalar>& cols, int k, int stride, int pad, int oh, int ow, FeatureMap<Scalar>& dx) {
  col2im(cols.data(), cols.cols(), k, stride, pad, 0, oh, ow, dx);
}

/// Per-thread scratch buffers reused across convolution calls.
template <typename Scalar>
Matrix<Scalar>& conv_scratch(int slot) {
  thread_local std::array<Matrix<Scalar>, 2> buffers;
  return buffers[static_cast<size_t>(slot)];
}

/// 2-D convolution with bias and "same"-style padding (pad = kernel / 2).
/// Weights are stored as out x (in * k * k).
template <typename Scalar>
class Conv2d {
 public:
  Conv2d() = default;

  /// Registers `<name>.weight` and `<name>.bias`; weight std is
  /// sqrt(gain / fan_in) (gain 2 ahead of a ReLU, 1 otherwise).
  Conv2d(ParameterStore<Scalar>& store, const std::string& name, int in_channels, int out_channels, int kernel,
         int stride = 1, Activation act = Activation::relu)
      : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), pad_(kernel / 2), act_(act) {
    const int fan_in = in_channels * kernel * kernel;
    const double gain = act == Activation::relu ? 2.0 : 1.0;
    weight_ = store.add(name + ".weight", out_channels, fan_in, std::sqrt(gain / fan_in));
    bias_ = store.add(name + ".bias", out_channels, 1, 0.0);
  }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return kernel_; }
  int stride() const { return stride_; }
  int weight_index() const { return weight_; }
  int bias_index() const { return bias_; }
  Activation activation() const { return act_; }

  int out_height(int h) const { return (h + 2 * pad_ - kernel_) / stride_ + 1; }
  int out_width(int w) const { return (w + 2 * pad_ - kernel_) / stride_ + 1; }

  /// Output after the activation.
  FeatureMap<Scalar> forward(const ParameterStore<Scalar>& ps, const FeatureMap<Scalar>& x) const {
    if (x.channels() != in_) {
      throw ConfigError("conv expects " + std::to_string(in_) + " input channels, got " +
                        std::to_string(x.channels()));
    }
    const int oh = out_height(x.height), ow = out_width(x.width);
    FeatureMap<Scalar> y(out_, oh, ow, x.scale * stride_);
    const auto& w = ps[weight_].value;
    const auto b = ps[bias_].value.col(0);
    const bool relu = act_ == Activation::relu;
    if (pointwise()) {
      y.values.noalias() = w * x.values;
      y.values.colwise() += b;
      if (relu) relu_inplace(y);
      return y;
    }
    const int rows = chunk_rows(ow);
    Matrix<Scalar>& cols = scratch(0, w.cols(), Eigen::Index(rows) * ow);
    for (int oy0 = 0; oy0 < oh; oy0 += rows) {
      const int oy1 = std::min(oh, oy0 + rows);
      const Eigen::Index n = Eigen::Index(oy1 - oy0) * ow;
      im2col(x, kernel_, stride_, pad_, oy0, oy1, ow, cols.data(), cols.cols());
      auto yc = y.values.middleCols(Eigen::Index(oy0) * ow, n);
      yc.noalias() = w * cols.leftCols(n);
      yc.colwise() += b;
      if (relu) yc = yc.cwiseMax(Scalar(0));
    }
    return y;
  }

  /// `y` is this layer's forward output; `dy` the gradient w.r.t. it.
  /// Accumulates parameter gradients into `grads` and returns dL/dx.
  FeatureMap<Scalar> backward(const ParameterStore<Scalar>& ps, const FeatureMap<Scalar>& x,
                              const FeatureMap<Scalar>& y, FeatureMap<Scalar> dy, GradientSet<Scalar>& grads,
                              bool need_input_grad = true) const {
    const auto& w = ps[weight_].value;
    auto gb = grads[static_cast<size_t>(bias_)].col(0);
    const bool relu = act_ == Activation::relu;
    FeatureMap<Scalar> dx = like(x, in_);
    if (pointwise()) {
      if (relu) relu_backward_inplace(dy, y);
      gb += dy.values.rowwise().sum();
      grads[static_cast<size_t>(weight_)].noalias() += dy.values * x.values.transpose();
      if (need_input_grad) dx.values.noalias() = w.transpose() * dy.values;
      return dx;
    }
    const int oh = dy.height, ow = dy.width, rows = chunk_rows(ow);
    const bool transposed_input_grad = need_input_grad && stride_ == 1;
    const bool scatter_input_grad = need_input_grad && stride_ != 1;
    Matrix<Scalar>& cols = scratch(0, w.cols(), Eigen::Index(rows) * ow);
    Matrix<Scalar>& dcols = scratch(1, scatter_input_grad ? w.cols() : 0, Eigen::Index(rows) * ow);
    auto& gw = grads[static_cast<size_t>(weight_)];
    for (int oy0 = 0; oy0 < oh; oy0 += rows) {
      const int oy1 = std::min(oh, oy0 + rows);
      const Eigen::Index p0 = Eigen::Index(oy0) * ow, n = Eigen::Index(oy1 - oy0) * ow;
      auto dyc = dy.values.middleCols(p0, n);
      if (relu) dyc = (y.values.middleCols(p0, n).array() > Scalar(0)).select(dyc, Scalar(0));
      gb += dyc.rowwise().sum();
      im2col(x, kernel_, stride_, pad_, oy0, oy1, ow, cols.data(), cols.cols());
      gw.noalias() += dyc * cols.leftCols(n).transpose();
      if (scatter_input_grad) {
        dcols.leftCols(n).noalias() = w.transpose() * dyc;
        col2im(dcols.data(), dcols.cols(), kernel_, stride_, pad_, oy0, oy1, ow, dx);
      }
    }
    if (transposed_input_grad) {
      const Matrix<Scalar> wf = flipped_weight(w);
      Matrix<Scalar>& dycols = scratch(1, wf.cols(), Eigen::Index(rows) * ow);
      for (int oy0 = 0; oy0 < oh; oy0 += rows) {
        const int oy1 = std::min(oh, oy0 + rows);
        const Eigen::Index n = Eigen::Index(oy1 - oy0) * ow;
        im2col(dy, kernel_, 1, pad_, oy0, oy1, ow, dycols.data(), dycols.cols());
        dx.values.middleCols(Eigen::Index(oy0) * ow, n).noalias() = wf * dycols.leftCols(n);
      }
    }
    return dx;
  }

 private:
  static constexpr int kChunkPixels = 2048;

  bool pointwise() const { return kernel_ == 1 && stride_ == 1; }
  /// Weight of the adjoint stride-1 convolution: in x (out * k * k), taps
  /// rotated by 180 degrees.
  Matrix<Scalar> flipped_weight(const Matrix<Scalar>& w) const {
    const int k = kernel_;
    Matrix<Scalar> wf(in_, Eigen::Index(out_) * k * k);
    for (int o = 0; o < out_; ++o) {
      for (int c = 0; c < in_; ++c) {
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            wf(c, (o * k + (k - 1 - ky)) * k + (k - 1 - kx)) = w(o, (c * k + ky) * k + kx);
          }
        }
      }
    }
    return wf;
  }
  static int chunk_rows(int ow) { return std::max(1, kChunkPixels / ow); }
  static Matrix<Scalar>& scratch(int slot, Eigen::Index rows, Eigen::Index cols) {
    Matrix<Scalar>& m = conv_scratch<Scalar>(slot);
    if (m.rows() != rows || m.cols() != cols) m.resize(rows, cols);
    return m;
  }

  int in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0;
  Activation act_ = Activation::relu;
  int weight_ = -1, bias_ = -1;
};

}  // namespace fdct
