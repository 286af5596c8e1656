#include <doctest.h>

#include <random>

#include "fdct/blocks.hpp"

using namespace fdct;

namespace {

FeatureMap<double> random_map(int c, int h, int w, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                              int scale = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  FeatureMap<double> m(c, h, w, scale);
  for (Eigen::Index i = 0; i < m.values.size(); ++i) m.values.data()[i] = u(rng);
  return m;
}

double dot(const FeatureMap<double>& a, const FeatureMap<double>& b) {
  return (a.values.array() * b.values.array()).sum();
}

/// Central-difference check of d(sum r * f(x))/dx and /dparams for every entry.
template <typename Forward>
void check_gradients(ParameterStore<double>& store, FeatureMap<double>& x, const FeatureMap<double>& analytic_dx,
                     const GradientSet<double>& grads, Forward f) {
  const double h = 1e-6;
  auto probe = [&](double& slot, double analytic) {
    const double keep = slot;
    slot = keep + h;
    const double lp = f();
    slot = keep - h;
    const double lm = f();
    slot = keep;
    const double fd = (lp - lm) / (2 * h);
    CHECK(std::abs(analytic - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
  };
  for (Eigen::Index i = 0; i < x.values.size(); i += 3) probe(x.values.data()[i], analytic_dx.values.data()[i]);
  for (int p = 0; p < store.size(); ++p) {
    auto& v = store[p].value;
    for (Eigen::Index i = 0; i < v.size(); i += 7) probe(v.data()[i], grads[static_cast<size_t>(p)].data()[i]);
  }
}

}  // namespace

TEST_CASE("OSA aggregation widths") {
  ParameterStore<float> store;
  const FdctConfig full = FdctConfig::full(), slim = FdctConfig::slim();
  OsaBlock<float> a(store, "a", 64, 64, full.osa_layers, full.osa_stage_channels);
  OsaBlock<float> b(store, "b", 32, 32, slim.osa_layers, slim.osa_stage_channels);
  CHECK(a.concat_channels() == 164);
  CHECK(b.concat_channels() == 96);
  CHECK(a.reducer().out_channels() == 64);
  CHECK(b.reducer().out_channels() == 32);
  CHECK_THROWS_AS(OsaBlock<float>(store, "c", 16, 32, 2, 8), ConfigError);
}

TEST_CASE("OSA with a zero reducer is the identity") {
  std::mt19937_64 rng(1);
  ParameterStore<double> store;
  OsaBlock<double> osa(store, "osa", 8, 8, 3, 4);
  store.initialize(1);
  store[osa.reducer().weight_index()].value.setZero();
  const auto x = random_map(8, 6, 6, rng);
  CHECK(osa.forward(store, x, nullptr).values == x.values);
  FeatureMap<double> wide = random_map(11, 6, 6, rng);
  ParameterStore<double> s2;
  OsaBlock<double> osa2(s2, "osa", 11, 8, 2, 4);
  s2[osa2.reducer().weight_index()].value.setZero();
  CHECK(osa2.forward(s2, wide, nullptr).values == wide.values.topRows(8));
}

TEST_CASE("OSA backward matches finite differences") {
  std::mt19937_64 rng(2);
  ParameterStore<double> store;
  OsaBlock<double> osa(store, "osa", 6, 5, 3, 4);
  store.initialize(2);
  for (auto& p : store) p.value.array() += 0.01;
  auto x = random_map(6, 6, 5, rng);
  typename OsaBlock<double>::Cache cache;
  const auto y = osa.forward(store, x, &cache);
  const auto r = random_map(5, y.height, y.width, rng);
  auto grads = store.zeros_like();
  const auto dx = osa.backward(store, cache, r, grads);
  check_gradients(store, x, dx, grads, [&] { return dot(osa.forward(store, x, nullptr), r); });
}

TEST_CASE("downsample modes agree on constants") {
  ParameterStore<double> store;
  FeatureMap<double> x(4, 8, 8);
  x.values.setConstant(0.3);
  Downsample<double> mp(store, "m", 4, DownsampleMode::max_pool);
  Downsample<double> ap(store, "a", 4, DownsampleMode::avg_pool);
  Downsample<double> sc(store, "s", 4, DownsampleMode::strided_conv);
  const auto a = mp.forward(store, x, nullptr);
  CHECK(a.values == ap.forward(store, x, nullptr).values);
  CHECK(a.height == 4);
  const auto c = sc.forward(store, x, nullptr);
  CHECK(c.height == 4);
  CHECK(c.width == 4);
  CHECK(c.channels() == 4);
}

TEST_CASE("FFEB shapes") {
  std::mt19937_64 rng(3);
  const FdctConfig cfg = FdctConfig::full();
  ParameterStore<float> store;
  Ffeb<float> plain(store, "e1", cfg, false);
  Ffeb<float> with_sc(store, "e3", cfg, true);
  CHECK(plain.input_concat_channels() == 65);
  CHECK(with_sc.input_concat_channels() == 66);
  store.initialize(3);
  FeatureMap<float> features(64, 240, 320), depth(1, 240, 320);
  features.values.setConstant(0.1f);
  const auto out = plain.forward(store, features, depth, nullptr, nullptr);
  CHECK(out.pre_pool.channels() == 64);
  CHECK(out.pre_pool.height == 240);
  CHECK(out.pre_pool.width == 320);
  CHECK(out.out.channels() == 64);
  CHECK(out.out.height == 120);
  CHECK(out.out.width == 160);
  FeatureMap<float> wrong(1, 120, 160);
  CHECK_THROWS_AS(plain.forward(store, features, wrong, nullptr, nullptr), DimensionError);
}

TEST_CASE("DFCB shapes") {
  const FdctConfig cfg = FdctConfig::full();
  ParameterStore<float> store;
  Dfcb<float> first(store, "d1", cfg, false, true);
  Dfcb<float> later(store, "d3", cfg, true, false);
  CHECK(first.input_concat_channels() == 64 + 64 + 1 + 64);
  CHECK(later.input_concat_channels() == 130);
  store.initialize(4);
  FeatureMap<float> features(64, 15, 20), fusion(64, 15, 20), depth(1, 15, 20), enc(64, 15, 20);
  const auto out = first.forward(store, features, &fusion, depth, enc, nullptr, nullptr);
  CHECK(out.out.channels() == 64);
  CHECK(out.out.height == 30);
  CHECK(out.out.width == 40);
  CHECK(out.pre_up.height == 15);
}

TEST_CASE("SFM shapes and identity selection") {
  std::mt19937_64 rng(5);
  ParameterStore<double> store;
  Sfm<double> sfm(store, "s", 4);
  const auto prev = random_map(4, 8, 10, rng, 0.0, 1.0);
  const auto enc = random_map(4, 4, 5, rng, 0.0, 1.0);
  const auto y = sfm.forward(store, prev, enc, nullptr);
  CHECK(y.height == 4);
  CHECK(y.width == 5);
  auto& w = store[sfm.mixer().weight_index()].value;
  w.setZero();
  for (int c = 0; c < 4; ++c) w(c, 4 + c) = 1.0;
  CHECK(sfm.forward(store, prev, enc, nullptr).values == enc.values);
  CHECK_THROWS_AS(sfm.forward(store, enc, enc, nullptr), DimensionError);
}

TEST_CASE("block backward passes match finite differences") {
  std::mt19937_64 rng(6);
  FdctConfig cfg;
  cfg.channels = 4;
  cfg.osa_layers = 2;
  cfg.osa_stage_channels = 3;

  SUBCASE("FFEB with shortcut") {
    for (const auto mode : {DownsampleMode::max_pool, DownsampleMode::avg_pool, DownsampleMode::strided_conv}) {
      for (const auto fusion : {DepthFusionMode::conv_fuse, DepthFusionMode::concat}) {
        cfg.downsample = mode;
        cfg.depth_fusion = fusion;
        ParameterStore<double> store;
        Ffeb<double> block(store, "e", cfg, true);
        store.initialize(7);
        for (auto& p : store) p.value.array() += 0.02;
        auto x = random_map(4, 8, 6, rng);
        const auto depth = random_map(1, 8, 6, rng, 0.0, 1.0);
        const auto sc = random_map(1, 8, 6, rng);
        typename Ffeb<double>::Cache cache;
        const auto out = block.forward(store, x, depth, &sc, &cache);
        const auto r1 = random_map(4, out.out.height, out.out.width, rng);
        const auto r2 = random_map(4, out.pre_pool.height, out.pre_pool.width, rng);
        auto grads = store.zeros_like();
        const auto g = block.backward(store, cache, r1, r2, grads);
        REQUIRE(g.shortcut.has_value());
        check_gradients(store, x, g.features, grads, [&] {
          const auto o = block.forward(store, x, depth, &sc, nullptr);
          return dot(o.out, r1) + dot(o.pre_pool, r2);
        });
      }
    }
  }

  SUBCASE("DFCB with fusion input") {
    ParameterStore<double> store;
    Dfcb<double> block(store, "d", cfg, true, true);
    store.initialize(8);
    for (auto& p : store) p.value.array() += 0.02;
    auto x = random_map(4, 4, 6, rng);
    const auto fusion = random_map(4, 4, 6, rng);
    const auto depth = random_map(1, 4, 6, rng, 0.0, 1.0);
    const auto enc = random_map(4, 4, 6, rng);
    const auto sc = random_map(1, 4, 6, rng);
    typename Dfcb<double>::Cache cache;
    const auto out = block.forward(store, x, &fusion, depth, enc, &sc, &cache);
    const auto r1 = random_map(4, out.out.height, out.out.width, rng);
    const auto r2 = random_map(4, out.pre_up.height, out.pre_up.width, rng);
    auto grads = store.zeros_like();
    const auto g = block.backward(store, cache, r1, r2, grads);
    REQUIRE(g.fusion.has_value());
    check_gradients(store, x, g.features, grads, [&] {
      const auto o = block.forward(store, x, &fusion, depth, enc, &sc, nullptr);
      return dot(o.out, r1) + dot(o.pre_up, r2);
    });
  }

  SUBCASE("SFM") {
    ParameterStore<double> store;
    Sfm<double> block(store, "s", 4);
    store.initialize(9);
    auto prev = random_map(4, 8, 6, rng);
    const auto enc = random_map(4, 4, 3, rng);
    typename Sfm<double>::Cache cache;
    const auto y = block.forward(store, prev, enc, &cache);
    const auto r = random_map(4, y.height, y.width, rng);
    auto grads = store.zeros_like();
    const auto g = block.backward(store, cache, r, grads);
    check_gradients(store, prev, g.prev, grads, [&] { return dot(block.forward(store, prev, enc, nullptr), r); });
  }

  SUBCASE("shortcut projections") {
    for (const int resample : {2, 4, -2, -4}) {
      ParameterStore<double> store;
      ShortcutProjection<double> block(store, "p", 4, resample);
      store.initialize(10);
      auto x = random_map(4, 8, 8, rng);
      typename ShortcutProjection<double>::Cache cache;
      const auto y = block.forward(store, x, &cache);
      CHECK(y.channels() == 1);
      CHECK(y.height == (resample > 0 ? 8 / resample : 8 * -resample));
      const auto r = random_map(1, y.height, y.width, rng);
      auto grads = store.zeros_like();
      const auto dx = block.backward(store, cache, r, grads);
      check_gradients(store, x, dx, grads, [&] { return dot(block.forward(store, x, nullptr), r); });
    }
  }
}
