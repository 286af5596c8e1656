#include <doctest.h>

#include <random>

#include "fdct/conv.hpp"

using namespace fdct;

namespace {

FeatureMap<double> random_map(int c, int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FeatureMap<double> m(c, h, w);
  for (Eigen::Index i = 0; i < m.values.size(); ++i) m.values.data()[i] = u(rng);
  return m;
}

FeatureMap<double> conv_oracle(const FeatureMap<double>& x, const Matrix<double>& w, const Matrix<double>& b, int k,
                               int stride, bool relu) {
  const int pad = k / 2;
  const int oh = (x.height + 2 * pad - k) / stride + 1, ow = (x.width + 2 * pad - k) / stride + 1;
  FeatureMap<double> y(static_cast<int>(w.rows()), oh, ow);
  for (int o = 0; o < w.rows(); ++o) {
    for (int yy = 0; yy < oh; ++yy) {
      for (int xx = 0; xx < ow; ++xx) {
        double acc = b(o, 0);
        for (int c = 0; c < x.channels(); ++c) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int sy = yy * stride + ky - pad, sx = xx * stride + kx - pad;
              if (sy < 0 || sx < 0 || sy >= x.height || sx >= x.width) continue;
              acc += w(o, (c * k + ky) * k + kx) * x.plane(c)(sy, sx);
            }
          }
        }
        y.plane(o)(yy, xx) = relu ? std::max(0.0, acc) : acc;
      }
    }
  }
  return y;
}

struct ConvCase {
  int in, out, kernel, stride, h, w;
  Activation act;
};

}  // namespace

TEST_CASE("pixel shuffle places channel c*r^2 + dy*r + dx at (r*y+dy, r*x+dx)") {
  FeatureMap<double> x(8, 2, 3);
  for (int c = 0; c < 8; ++c) x.values.row(c).setConstant(c);
  const auto y = pixel_shuffle(x, 2);
  REQUIRE(y.channels() == 2);
  CHECK(y.height == 4);
  CHECK(y.width == 6);
  for (int c = 0; c < 2; ++c) {
    for (int yy = 0; yy < 4; ++yy) {
      for (int xx = 0; xx < 6; ++xx) CHECK(y.plane(c)(yy, xx) == c * 4 + (yy % 2) * 2 + (xx % 2));
    }
  }
}

TEST_CASE("pixel unshuffle inverts pixel shuffle") {
  std::mt19937_64 rng(3);
  const auto x = random_map(12, 5, 7, rng);
  const auto back = pixel_unshuffle(pixel_shuffle(x, 2), 2);
  CHECK(back.values == x.values);
}

TEST_CASE("pixel shuffle of a constant map is constant") {
  FeatureMap<double> x(16, 3, 3);
  x.values.setConstant(0.25);
  const auto y = pixel_shuffle(x, 2);
  CHECK((y.values.array() == 0.25).all());
}

TEST_CASE("max and avg pooling agree on constants") {
  FeatureMap<double> x(3, 8, 6);
  x.values.setConstant(-1.5);
  CHECK(max_pool(x, 2).values == avg_pool(x, 2).values);
  CHECK(max_pool(x, 2).height == 4);
}

TEST_CASE("pooling rejects indivisible sizes") {
  FeatureMap<double> x(1, 5, 4);
  CHECK_THROWS_AS(max_pool(x, 2), DimensionError);
  CHECK_THROWS_AS(avg_pool(x, 2), DimensionError);
}

TEST_CASE("max pool picks the block maximum and routes its gradient") {
  FeatureMap<double> x(1, 2, 2);
  x.values << 1, 4, 3, 2;
  std::vector<std::int32_t> argmax;
  const auto y = max_pool(x, 2, &argmax);
  CHECK(y.values(0, 0) == 4);
  FeatureMap<double> g(1, 1, 1);
  g.values(0, 0) = 7;
  const auto dx = max_pool_backward(g, argmax, 2);
  CHECK(dx.values(0, 1) == 7);
  CHECK(dx.values.sum() == 7);
}

TEST_CASE("resampling backward passes are adjoints") {
  std::mt19937_64 rng(11);
  const auto x = random_map(2, 8, 6, rng);
  const auto g = random_map(2, 4, 3, rng);
  const auto gu = random_map(2, 16, 12, rng);
  const double lhs_avg = (avg_pool(x, 2).values.array() * g.values.array()).sum();
  const double rhs_avg = (x.values.array() * avg_pool_backward(g, 2).values.array()).sum();
  CHECK(lhs_avg == doctest::Approx(rhs_avg).epsilon(1e-12));
  const double lhs_up = (upsample_nearest(x, 2).values.array() * gu.values.array()).sum();
  const double rhs_up = (x.values.array() * upsample_nearest_backward(gu, 2).values.array()).sum();
  CHECK(lhs_up == doctest::Approx(rhs_up).epsilon(1e-12));
}

TEST_CASE("concat and slice round trip") {
  std::mt19937_64 rng(5);
  const auto a = random_map(2, 3, 4, rng);
  const auto b = random_map(3, 3, 4, rng);
  const auto cat = concat_channels<double>({a, b});
  CHECK(cat.channels() == 5);
  CHECK(slice_channels(cat, 2, 3).values == b.values);
  const auto c = random_map(1, 2, 4, rng);
  CHECK_THROWS_AS(concat_channels<double>({a, c}), DimensionError);
}

TEST_CASE("conv forward matches a direct loop") {
  std::mt19937_64 rng(7);
  for (const ConvCase cc : {ConvCase{3, 5, 3, 1, 7, 9, Activation::relu}, ConvCase{4, 2, 3, 2, 8, 6, Activation::linear},
                            ConvCase{6, 3, 1, 1, 5, 5, Activation::relu}}) {
    ParameterStore<double> store;
    Conv2d<double> conv(store, "c", cc.in, cc.out, cc.kernel, cc.stride, cc.act);
    store.initialize(1);
    store[conv.bias_index()].value.setRandom();
    const auto x = random_map(cc.in, cc.h, cc.w, rng);
    const auto y = conv.forward(store, x);
    const auto ref = conv_oracle(x, store[conv.weight_index()].value, store[conv.bias_index()].value, cc.kernel,
                                 cc.stride, cc.act == Activation::relu);
    REQUIRE(y.height == ref.height);
    REQUIRE(y.width == ref.width);
    CHECK((y.values - ref.values).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("conv forward is chunk independent on wide images") {
  std::mt19937_64 rng(8);
  ParameterStore<double> store;
  Conv2d<double> conv(store, "c", 2, 3, 3, 1, Activation::linear);
  store.initialize(2);
  const auto x = random_map(2, 40, 300, rng);
  const auto ref = conv_oracle(x, store[conv.weight_index()].value, store[conv.bias_index()].value, 3, 1, false);
  CHECK((conv.forward(store, x).values - ref.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conv backward matches finite differences") {
  std::mt19937_64 rng(9);
  for (const ConvCase cc : {ConvCase{3, 4, 3, 1, 6, 5, Activation::linear}, ConvCase{2, 3, 3, 2, 6, 8, Activation::linear},
                            ConvCase{3, 2, 1, 1, 4, 4, Activation::linear}, ConvCase{2, 3, 3, 1, 5, 6, Activation::relu}}) {
    ParameterStore<double> store;
    Conv2d<double> conv(store, "c", cc.in, cc.out, cc.kernel, cc.stride, cc.act);
    store.initialize(3);
    store[conv.bias_index()].value.setConstant(0.05);
    auto x = random_map(cc.in, cc.h, cc.w, rng);
    const auto y = conv.forward(store, x);
    const auto r = random_map(cc.out, y.height, y.width, rng);
    auto loss = [&](const FeatureMap<double>& xin) {
      return (conv.forward(store, xin).values.array() * r.values.array()).sum();
    };
    auto grads = store.zeros_like();
    const auto dx = conv.backward(store, x, y, r, grads);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < x.values.size(); ++i) {
      const double keep = x.values.data()[i];
      x.values.data()[i] = keep + h;
      const double lp = loss(x);
      x.values.data()[i] = keep - h;
      const double lm = loss(x);
      x.values.data()[i] = keep;
      CHECK(dx.values.data()[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-6));
    }
    for (const int idx : {conv.weight_index(), conv.bias_index()}) {
      auto& p = store[idx].value;
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double keep = p.data()[i];
        p.data()[i] = keep + h;
        const double lp = loss(x);
        p.data()[i] = keep - h;
        const double lm = loss(x);
        p.data()[i] = keep;
        CHECK(grads[static_cast<size_t>(idx)].data()[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("im2col and col2im are adjoint") {
  std::mt19937_64 rng(10);
  const auto x = random_map(3, 6, 7, rng);
  for (const int stride : {1, 2}) {
    const int oh = (6 + 2 - 3) / stride + 1, ow = (7 + 2 - 3) / stride + 1;
    Matrix<double> cols;
    im2col(x, 3, stride, 1, oh, ow, cols);
    Matrix<double> g = Matrix<double>::Random(cols.rows(), cols.cols());
    FeatureMap<double> dx = like(x, 3);
    col2im(g, 3, stride, 1, oh, ow, dx);
    const double lhs = (cols.array() * g.array()).sum();
    const double rhs = (x.values.array() * dx.values.array()).sum();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("parameter store initialisation is seeded") {
  ParameterStore<float> a, b;
  a.add("w", 3, 4, 0.5);
  a.add("b", 3, 1, 0.0);
  b.add("w", 3, 4, 0.5);
  b.add("b", 3, 1, 0.0);
  a.initialize(42);
  b.initialize(42);
  CHECK(a[0].value == b[0].value);
  CHECK(a[1].value.isZero());
  CHECK(a.scalar_count() == 15);
}
