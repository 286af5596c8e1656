#include <doctest.h>

#include <cmath>
#include <random>

#include "fdct/metrics.hpp"
#include "oracles.hpp"

using namespace fdct;

namespace {

void check_against(const MetricsReport& r, const oracle::Metrics& m) {
  REQUIRE(r.pixel_count == m.n);
  CHECK(std::abs(r.rmse - m.rmse) < 1e-9);
  CHECK(std::abs(r.mae - m.mae) < 1e-9);
  CHECK(std::abs(r.rel - m.rel) < 1e-9);
  CHECK(std::abs(r.delta_105 - m.d105) < 1e-9);
  CHECK(std::abs(r.delta_110 - m.d110) < 1e-9);
  CHECK(std::abs(r.delta_125 - m.d125) < 1e-9);
}

}  // namespace

TEST_CASE("exact prediction") {
  std::mt19937_64 rng(1);
  const auto c = oracle::random_case(rng, 16, 16);
  const auto r = compute_metrics(c.gt, c.gt, c.mask);
  CHECK(r.rmse == 0.0);
  CHECK(r.rel == 0.0);
  CHECK(r.mae == 0.0);
  CHECK(r.delta_105 == 100.0);
  CHECK(r.delta_110 == 100.0);
  CHECK(r.delta_125 == 100.0);
}

TEST_CASE("uniform ratio of 1.1") {
  std::mt19937_64 rng(2);
  const auto c = oracle::random_case(rng, 16, 16);
  const DepthMap pred(c.gt.values * 1.1);
  const auto r = compute_metrics(pred, c.gt, c.mask);
  CHECK(r.rel == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.delta_105 == 0.0);
  CHECK(r.delta_110 == 0.0);
  CHECK(r.delta_125 == 100.0);
}

TEST_CASE("non-positive predictions never pass a threshold") {
  const DepthMap gt(2, 2, 1.0);
  const DepthMap pred(2, 2, 0.0);
  const auto r = compute_metrics(pred, gt, TransparentMask(2, 2, true));
  CHECK(r.delta_125 == 0.0);
  CHECK(r.rmse == doctest::Approx(1.0));
}

TEST_CASE("empty valid set is undefined") {
  const auto r = compute_metrics(DepthMap(3, 3, 1.0), DepthMap(3, 3, 1.0), TransparentMask(3, 3));
  CHECK_FALSE(r.defined());
  CHECK(std::isnan(r.rmse));
  CHECK(r.pixel_count == 0);
}

TEST_CASE("metrics match a per-pixel loop") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto c = oracle::random_case(rng, 16, 16);
    const auto r = compute_metrics(c.pred, c.gt, c.mask);
    check_against(r, oracle::metrics({&c.pred}, {&c.gt}, {&c.mask}));
    CHECK(r.delta_105 <= r.delta_110);
    CHECK(r.delta_110 <= r.delta_125);
    CHECK(r.mae <= r.rmse + 1e-15);
  }
}

TEST_CASE("aggregation pools pixels") {
  std::mt19937_64 rng(4);
  SUBCASE("identical samples") {
    const auto c = oracle::random_case(rng, 16, 16);
    const auto s = pixel_stats(c.pred, c.gt, c.mask);
    const auto one = report_from(s, 1);
    const auto two = aggregate({s, s});
    CHECK(two.rmse == doctest::Approx(one.rmse).epsilon(1e-14));
    CHECK(two.delta_110 == doctest::Approx(one.delta_110).epsilon(1e-14));
    CHECK(two.sample_count == 2);
  }
  SUBCASE("an empty sample contributes nothing") {
    const auto c = oracle::random_case(rng, 16, 16);
    const auto s = pixel_stats(c.pred, c.gt, c.mask);
    const auto empty = pixel_stats(c.pred, c.gt, TransparentMask(16, 16));
    const auto r = aggregate({empty, s});
    CHECK(r.rmse == report_from(s, 1).rmse);
    CHECK(r.sample_count == 1);
  }
  SUBCASE("three samples equal the concatenated pixel set") {
    std::vector<oracle::Case> cs;
    for (int i = 0; i < 3; ++i) cs.push_back(oracle::random_case(rng, 8 + 4 * i, 12));
    std::vector<PixelStats> stats;
    for (const auto& c : cs) stats.push_back(pixel_stats(c.pred, c.gt, c.mask));
    check_against(aggregate(stats), oracle::metrics({&cs[0].pred, &cs[1].pred, &cs[2].pred},
                                                    {&cs[0].gt, &cs[1].gt, &cs[2].gt},
                                                    {&cs[0].mask, &cs[1].mask, &cs[2].mask}));
  }
}

TEST_CASE("clamping predictions") {
  DepthMap p(1, 3);
  p(0, 0) = -1;
  p(0, 1) = 5;
  p(0, 2) = 20;
  const auto c = clamp_prediction(p, 10.0);
  CHECK(c(0, 0) == 0.0);
  CHECK(c(0, 1) == 5.0);
  CHECK(c(0, 2) == 10.0);
}

TEST_CASE("report json round trip and table") {
  std::mt19937_64 rng(5);
  const auto c = oracle::random_case(rng, 16, 16);
  const auto r = compute_metrics(c.pred, c.gt, c.mask);
  const nlohmann::json j = r;
  const auto back = j.get<MetricsReport>();
  CHECK(back.rmse == r.rmse);
  CHECK(back.pixel_count == r.pixel_count);
  CHECK(metrics_table_row("x", r).size() == metrics_table_header().size());
}
