// Acceptance run: one PASS/FAIL line per criterion. Pass criterion names
// (e.g. "AC3 AC7") to run a subset.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fdct/checkpoint.hpp"
#include "fdct/losses.hpp"
#include "fdct/metrics.hpp"
#include "fdct/network.hpp"
#include "fdct/train.hpp"
#include "oracles.hpp"

using namespace fdct;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

Outcome ac1_loss_oracles() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  const LossConfig cfg;
  double worst = 0, worst_edge = 0, worst_weighted = 0;
  for (int t = 0; t < 200; ++t) {
    const auto c = oracle::random_case(rng, 16, 16);
    const auto valid = valid_pixels(c.gt, c.mask);
    const auto v = oracle::valid_set(c.gt, c.mask);
    const double h = oracle::huber(c.pred, c.gt, v, cfg.delta);
    const double s = oracle::ssim(c.pred, c.gt, v, cfg.c1, cfg.c2);
    const double sm = oracle::smooth(c.pred, c.gt, v, cfg.epsilon);
    const auto b = total_loss(c.pred, c.gt, c.mask, ValidRange{}, cfg);
    worst = std::max({worst, std::abs(huber_loss(c.pred, c.gt, valid, cfg.delta) - h),
                      std::abs(ssim(c.pred, c.gt, valid, cfg.c1, cfg.c2) - s),
                      std::abs(smooth_loss(c.pred, c.gt, valid, cfg.epsilon) - sm), std::abs(b.huber - h),
                      std::abs(b.ssim - s), std::abs(b.smooth - sm),
                      std::abs(b.total - (h + cfg.alpha * (1 - s) + cfg.beta * sm))});

    const double sigma = 0.5 + 1.5 * (t % 4) / 3.0;
    worst_edge = std::max(worst_edge, (edge_weight_map(c.gt, sigma) - oracle::edge_map(c.gt, sigma)).abs().maxCoeff());
    LossConfig ecfg = cfg;
    ecfg.edge_weighting = true;
    ecfg.edge_blur_sigma = sigma;
    const auto w = oracle::edge_weights(c.gt, v, sigma);
    const auto eb = total_loss(c.pred, c.gt, c.mask, ValidRange{}, ecfg);
    worst_weighted = std::max(worst_weighted, std::abs(eb.huber - oracle::huber(c.pred, c.gt, v, cfg.delta, &w)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && worst_edge <= 1e-6 && worst_weighted <= 1e-6 && secs < 30,
          fmt("max |err| components %.2e (tol 1e-9), edge map %.2e, edge-weighted huber %.2e (tol 1e-6), %.1fs",
              worst, worst_edge, worst_weighted, secs)};
}

Outcome ac2_gradient_check() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2002);
  double worst = 0;
  long checked = 0, skipped = 0;
  for (int t = 0; t < 20; ++t) {
    LossConfig cfg;
    cfg.edge_weighting = t % 2 == 1;
    auto c = oracle::random_case(rng, 8, 8);
    DepthMap grad;
    total_loss(c.pred, c.gt, c.mask, ValidRange{}, cfg, &grad);
    const double h = 1e-4;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        if (std::abs(std::abs(c.pred(y, x) - c.gt(y, x)) - cfg.delta) < 1e-3) {
          ++skipped;
          continue;
        }
        const double keep = c.pred(y, x);
        c.pred(y, x) = keep + h;
        const double lp = total_loss(c.pred, c.gt, c.mask, ValidRange{}, cfg).total;
        c.pred(y, x) = keep - h;
        const double lm = total_loss(c.pred, c.gt, c.mask, ValidRange{}, cfg).total;
        c.pred(y, x) = keep;
        const double fd = (lp - lm) / (2 * h);
        const double scale = std::max(std::abs(fd), std::abs(grad(y, x)));
        if (scale > 1e-9) worst = std::max(worst, std::abs(grad(y, x) - fd) / scale);
        ++checked;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-3 && secs < 120,
          fmt("max rel err %.2e over %ld pixels (%ld near the Huber kink skipped), %.1fs", worst, checked, skipped,
              secs)};
}

Outcome ac3_huber_landmarks() {
  const DepthMap gt(4, 4, 1.0);
  const TransparentMask all(4, 4, true);
  const double delta = LossConfig{}.delta;
  const double a = huber_loss(DepthMap(4, 4, 1.05), gt, all, delta);
  const double b = huber_loss(DepthMap(4, 4, 1.2), gt, all, delta);
  const double at_delta = huber_loss(DepthMap(4, 4, 1.1), gt, all, delta);
  const double quad = 0.5 * 0.1 * 0.1, lin = 0.1 * 0.1 - 0.5 * 0.1 * 0.1;
  const bool ok = std::abs(a - 0.00125) <= 1e-12 && std::abs(b - 0.015) <= 1e-12 && std::abs(quad - 0.005) <= 1e-12 &&
                  std::abs(lin - 0.005) <= 1e-12 && std::abs(at_delta - 0.005) <= 1e-12 && delta == 0.1;
  return {ok, fmt("e=0.05 -> %.15g, e=0.2 -> %.15g, e=0.1 -> %.15g", a, b, at_delta)};
}

Outcome ac4_metric_oracles() {
  std::mt19937_64 rng(4004);
  double worst = 0;
  bool ordered = true;
  int empty = 0;
  for (int t = 0; t < 500; ++t) {
    const auto c = oracle::random_case(rng, 16, 16);
    const auto r = compute_metrics(c.pred, c.gt, c.mask);
    const auto m = oracle::metrics({&c.pred}, {&c.gt}, {&c.mask});
    if (r.pixel_count != m.n) worst = INFINITY;
    if (m.n == 0) {
      ++empty;
      if (!std::isnan(r.rmse)) worst = INFINITY;
      continue;
    }
    worst = std::max({worst, std::abs(r.rmse - m.rmse), std::abs(r.rel - m.rel), std::abs(r.mae - m.mae),
                      std::abs(r.delta_105 - m.d105), std::abs(r.delta_110 - m.d110), std::abs(r.delta_125 - m.d125)});
    ordered = ordered && r.delta_105 <= r.delta_110 && r.delta_110 <= r.delta_125 && r.mae <= r.rmse;
  }
  const auto c = oracle::random_case(rng, 16, 16);
  const auto u = compute_metrics(DepthMap(c.gt.values * 1.1), c.gt, c.mask);
  const bool uniform = std::abs(u.rel - 0.1) <= 1e-9 && u.delta_125 == 100.0;
  return {worst <= 1e-9 && ordered && uniform,
          fmt("max |err| %.2e over 500 cases (%d with no valid pixels report NaN), ordering %s, 1.1x case rel "
              "%.12f d1.25 %.1f",
              worst, empty, ordered ? "holds" : "violated", u.rel, u.delta_125)};
}

Outcome ac5_shapes() {
  const auto t0 = Clock::now();
  SynthSceneSpec spec;
  spec.seed = 5005;
  const Sample s = generate_scene(spec);
  int good = 0, total = 0;
  auto check = [&](const FdctConfig& cfg) {
    ++total;
    const FdctNetwork<float> net(cfg, 1);
    const FeatureMap<float> out = net.forward(s.rgb, s.raw_depth);
    if (out.channels() == 1 && out.height == 240 && out.width == 320 && out.values.allFinite()) ++good;
  };
  check(FdctConfig::full());
  check(FdctConfig::slim());
  for (const auto ds : {DownsampleMode::max_pool, DownsampleMode::avg_pool, DownsampleMode::strided_conv}) {
    for (const auto fusion : {DepthFusionMode::conv_fuse, DepthFusionMode::concat}) {
      for (const bool branch : {true, false}) {
        for (const bool sc : {true, false}) {
          FdctConfig cfg = FdctConfig::full();
          cfg.downsample = ds;
          cfg.depth_fusion = fusion;
          cfg.use_fusion_branch = branch;
          cfg.use_cross_shortcuts = sc;
          check(cfg);
        }
      }
    }
  }
  const FdctNetwork<float> full(FdctConfig::full());
  const bool wiring = full.ffeb(2).input_concat_channels() == 66 && full.dfcb(2).input_concat_channels() == 130 &&
                      full.ffeb(0).osa().concat_channels() == 164;
  const double secs = seconds_since(t0);
  return {good == total && total == 26 && wiring && secs < 300,
          fmt("%d/%d configs return 240x320x1, concat widths 66/130/164 %s, %.1fs", good, total,
              wiring ? "ok" : "wrong", secs)};
}

Outcome ac6_parameters() {
  const FdctNetwork<float> full(FdctConfig::full()), slim(FdctConfig::slim());
  const long f = full.parameter_count(), s = slim.parameter_count();
  std::printf("  full preset %ld parameters (%.3fM; reference 1.25M), slim %ld (%.3fM; reference 0.39M)\n", f, f / 1e6,
              s, s / 1e6);
  for (const auto& [name, n] : full.parameter_breakdown()) std::printf("    %-10s %8ld\n", name.c_str(), n);
  return {s < f && f >= 600000 && f <= 2000000, fmt("full %ld in [0.6M, 2.0M], slim %ld < full", f, s)};
}

Outcome ac7_overfit() {
  SynthSceneSpec spec;
  spec.height = 160;
  spec.width = 224;
  spec.seed = 100;
  const auto samples = generate_scenes(spec, 4);
  InMemorySource source(samples);
  TrainConfig tc;
  tc.epochs = 1;
  tc.milestones = {};
  tc.batch_size = 4;
  tc.seed = 1;
  Trainer trainer(FdctConfig::slim(), LossConfig{}, tc);
  const double raw = evaluate_copy_raw(source, ValidRange{}).pooled.rmse;
  const auto t0 = Clock::now();
  double last_loss = 0;
  for (int step = 0; step < 500; ++step) {
    last_loss = train_step(trainer.network(), trainer.optimizer(), samples, LossConfig{}, ValidRange{}, 1e-3).loss.total;
  }
  const double rmse = evaluate(trainer.network(), source, ValidRange{}).pooled.rmse;
  const double secs = seconds_since(t0);
  return {rmse < 0.01 && secs < 600,
          fmt("slim preset, masked RMSE %.5f m after 500 steps (copy-raw %.4f), final loss %.6f, %.0fs", rmse, raw,
              last_loss, secs)};
}

Outcome ac8_generalization() {
  const auto t0 = Clock::now();
  SynthSceneSpec spec;
  spec.height = 160;
  spec.width = 224;
  spec.seed = 800000;
  InMemorySource train(generate_scenes(spec, 200));
  spec.seed = 900000;
  InMemorySource test(generate_scenes(spec, 50));
  TrainConfig tc;
  tc.epochs = 5;
  tc.milestones = {};
  tc.batch_size = 4;
  tc.seed = 8;
  Trainer trainer(FdctConfig::slim(), LossConfig{}, tc);
  FitOptions opts;
  opts.on_epoch = [](const EpochRecord& r) {
    std::printf("  epoch %d train loss %.5f\n", r.epoch + 1, r.train_loss);
    std::fflush(stdout);
  };
  trainer.fit(train, nullptr, opts);
  const double model = evaluate(trainer.network(), test, ValidRange{}).pooled.rmse;
  const double raw = evaluate_copy_raw(test, ValidRange{}).pooled.rmse;
  const double gain = 1.0 - model / raw;
  const double secs = seconds_since(t0);
  return {gain >= 0.30 && secs < 3600,
          fmt("slim preset, held-out RMSE %.4f vs copy-raw %.4f (%.1f%% better, need 30%%), %.0fs", model, raw,
              100 * gain, secs)};
}

Outcome ac9_schedule() {
  const TrainConfig cfg;
  const double expect[] = {1e-3, 5e-4, 2.5e-4, 1.25e-4, 6.25e-5};
  const int lengths[] = {5, 10, 10, 10, 5};
  bool ok = cfg.epochs == 40;
  int epoch = 0;
  for (int k = 0; k < 5; ++k) {
    for (int i = 0; i < lengths[k]; ++i, ++epoch) ok = ok && lr_at(cfg, epoch) == expect[k];
  }
  return {ok && epoch == 40, fmt("lr_at(0..39) %s the 5/10/10/10/5 halving pattern from 1e-3", ok ? "matches" : "breaks")};
}

Outcome ac10_determinism() {
  const auto dir = fs::temp_directory_path() / "fdct_acceptance_ac10";
  fs::remove_all(dir);
  SynthSceneSpec spec;
  spec.height = 64;
  spec.width = 96;
  spec.seed = 1010;
  InMemorySource train(generate_scenes(spec, 6));
  TrainConfig tc;
  tc.epochs = 17;
  tc.batch_size = 2;
  tc.milestones = {8};
  tc.seed = 10;
  auto run = [&](long max_steps, std::vector<double>& losses, Trainer& t) {
    FitOptions opts;
    opts.max_steps = max_steps;
    opts.on_step = [&](const StepLog& s) { losses.push_back(s.loss.total); };
    t.fit(train, nullptr, opts);
  };
  std::vector<double> a, b, resumed;
  Trainer ta(FdctConfig::slim(), LossConfig{}, tc), tb(FdctConfig::slim(), LossConfig{}, tc);
  run(50, a, ta);
  run(50, b, tb);
  {
    Trainer first(FdctConfig::slim(), LossConfig{}, tc);
    run(25, resumed, first);
    fs::create_directories(dir);
    first.save(dir / "mid.ckpt");
  }
  Trainer second = Trainer::load(dir / "mid.ckpt");
  run(25, resumed, second);
  double rerun = 0, resume = 0;
  for (size_t i = 0; i < a.size() && i < b.size(); ++i) rerun = std::max(rerun, std::abs(a[i] - b[i]));
  for (size_t i = 0; i < a.size() && i < resumed.size(); ++i) resume = std::max(resume, std::abs(a[i] - resumed[i]));
  const bool sizes = a.size() == 50 && b.size() == 50 && resumed.size() == 50;
  return {sizes && rerun <= 1e-6 && resume <= 1e-6,
          fmt("50 steps: rerun max |dloss| %.2e, save/load/resume at step 25 max |dloss| %.2e", rerun, resume)};
}

/// Perturbs pixels that are outside the valid set and at least `margin`
/// (Chebyshev distance) away from every valid pixel. Ground-truth values
/// are perturbed without becoming valid.
void perturb_outside(const oracle::Case& c, const TransparentMask& valid, int margin, std::mt19937_64& rng,
                     DepthMap* pred, DepthMap* gt) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int h = c.gt.height(), w = c.gt.width();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool near = false;
      for (int dy = -margin; dy <= margin && !near; ++dy) {
        for (int dx = -margin; dx <= margin; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && xx >= 0 && yy < h && xx < w && valid(yy, xx)) {
            near = true;
            break;
          }
        }
      }
      if (near) continue;
      if (pred) (*pred)(y, x) += 2 * u(rng) - 1;
      if (gt) (*gt)(y, x) = c.mask(y, x) ? 1.6 + u(rng) : 3 * u(rng);
    }
  }
}

bool same_bundle(const LossBundle& a, const LossBundle& b) {
  return a.total == b.total && a.huber == b.huber && a.ssim == b.ssim && a.smooth == b.smooth &&
         a.valid_pixel_count == b.valid_pixel_count;
}

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool same_report(const MetricsReport& a, const MetricsReport& b) {
  return same(a.rmse, b.rmse) && same(a.rel, b.rel) && same(a.mae, b.mae) && same(a.delta_105, b.delta_105) &&
         same(a.delta_110, b.delta_110) && same(a.delta_125, b.delta_125) && a.pixel_count == b.pixel_count;
}

Outcome ac11_masking() {
  std::mt19937_64 rng(1111);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int cases = 0, invariant = 0;
  for (int t = 0; t < 200; ++t) {
    auto c = oracle::random_case(rng, 16, 16);
    const int y0 = static_cast<int>(u(rng) * 8), x0 = static_cast<int>(u(rng) * 8);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) c.mask(y, x) = c.mask(y, x) && y >= y0 && y < y0 + 6 && x >= x0 && x < x0 + 6;
    }
    const auto valid = valid_pixels(c.gt, c.mask);
    const LossConfig cfg;
    const auto base = total_loss(c.pred, c.gt, c.mask, ValidRange{}, cfg);
    const auto base_m = compute_metrics(c.pred, c.gt, c.mask);
    for (const bool on_gt : {false, true}) {
      DepthMap pred = c.pred, gt = c.gt;
      perturb_outside(c, valid, 2, rng, on_gt ? nullptr : &pred, on_gt ? &gt : nullptr);
      ++cases;
      if (same_bundle(base, total_loss(pred, gt, c.mask, ValidRange{}, cfg)) &&
          same_report(base_m, compute_metrics(pred, gt, c.mask))) {
        ++invariant;
      }
    }
    DepthMap pred = c.pred;
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        if (!valid(y, x)) pred(y, x) += 0.7;
      }
    }
    const auto near = total_loss(pred, c.gt, c.mask, ValidRange{}, cfg);
    ++cases;
    if (near.huber == base.huber && near.ssim == base.ssim && same_report(base_m, compute_metrics(pred, c.gt, c.mask))) {
      ++invariant;
    }
  }
  return {invariant == cases, fmt("%d/%d perturbations left every loss component and metric unchanged", invariant,
                                  cases)};
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1", ac1_loss_oracles},    {"AC2", ac2_gradient_check}, {"AC3", ac3_huber_landmarks},
      {"AC4", ac4_metric_oracles},  {"AC5", ac5_shapes},         {"AC6", ac6_parameters},
      {"AC7", ac7_overfit},         {"AC8", ac8_generalization}, {"AC9", ac9_schedule},
      {"AC10", ac10_determinism},   {"AC11", ac11_masking}};
  const std::set<std::string> wanted(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!wanted.empty() && !wanted.count(name)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s  %s\n", name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
