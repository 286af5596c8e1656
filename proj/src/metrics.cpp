#include "fdct/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace fdct {

PixelStats& PixelStats::operator+=(const PixelStats& o) {
  count += o.count;
  sum_sq += o.sum_sq;
  sum_abs += o.sum_abs;
  sum_rel += o.sum_rel;
  within_105 += o.within_105;
  within_110 += o.within_110;
  within_125 += o.within_125;
  return *this;
}

PixelStats pixel_stats(const DepthMap& pred, const DepthMap& gt, const TransparentMask& mask,
                       const ValidRange& range) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw DimensionError("compute_metrics: prediction and ground truth shapes differ");
  }
  const TransparentMask valid = valid_pixels(gt, mask, range);
  PixelStats s;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!valid(y, x)) continue;
      const double p = pred(y, x), g = gt(y, x);
      const double e = p - g;
      ++s.count;
      s.sum_sq += e * e;
      s.sum_abs += std::abs(e);
      s.sum_rel += std::abs(e) / g;
      if (p > 0.0) {
        const double ratio = std::max(p / g, g / p);
        s.within_105 += ratio < 1.05;
        s.within_110 += ratio < 1.10;
        s.within_125 += ratio < 1.25;
      }
    }
  }
  return s;
}

MetricsReport report_from(const PixelStats& s, long sample_count) {
  MetricsReport r;
  r.pixel_count = s.count;
  r.sample_count = sample_count;
  if (s.count == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.rmse = r.rel = r.mae = r.delta_105 = r.delta_110 = r.delta_125 = nan;
    return r;
  }
  const double n = static_cast<double>(s.count);
  r.rmse = std::sqrt(s.sum_sq / n);
  r.rel = s.sum_rel / n;
  r.mae = s.sum_abs / n;
  r.delta_105 = 100.0 * static_cast<double>(s.within_105) / n;
  r.delta_110 = 100.0 * static_cast<double>(s.within_110) / n;
  r.delta_125 = 100.0 * static_cast<double>(s.within_125) / n;
  return r;
}

MetricsReport compute_metrics(const DepthMap& pred, const DepthMap& gt, const TransparentMask& mask,
                              const ValidRange& range) {
  const PixelStats s = pixel_stats(pred, gt, mask, range);
  return report_from(s, s.count > 0 ? 1 : 0);
}

MetricsReport aggregate(const std::vector<PixelStats>& per_sample) {
  PixelStats pooled;
  long samples = 0;
  for (const auto& s : per_sample) {
    pooled += s;
    samples += s.count > 0;
  }
  return report_from(pooled, samples);
}

DepthMap clamp_prediction(const DepthMap& pred, double depth_max) {
  return DepthMap(pred.values.max(0.0).min(depth_max));
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = nlohmann::json{{"rmse", number_or_null(r.rmse)},
                     {"rel", number_or_null(r.rel)},
                     {"mae", number_or_null(r.mae)},
                     {"delta_105", number_or_null(r.delta_105)},
                     {"delta_110", number_or_null(r.delta_110)},
                     {"delta_125", number_or_null(r.delta_125)},
                     {"pixel_count", r.pixel_count},
                     {"sample_count", r.sample_count},
                     {"defined", r.defined()},
                     {"pooling", "pixel"},
                     {"delta_comparison", "strict"}};
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
  r.rmse = number_or_nan(j.at("rmse"));
  r.rel = number_or_nan(j.at("rel"));
  r.mae = number_or_nan(j.at("mae"));
  r.delta_105 = number_or_nan(j.at("delta_105"));
  r.delta_110 = number_or_nan(j.at("delta_110"));
  r.delta_125 = number_or_nan(j.at("delta_125"));
  r.pixel_count = j.at("pixel_count").get<long>();
  r.sample_count = j.at("sample_count").get<long>();
}

std::string metrics_table_header() {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s %8s %8s %8s %8s %8s %8s", "Model", "RMSE", "REL", "MAE", "d1.05", "d1.10",
                "d1.25");
  return buf;
}

std::string metrics_table_row(const std::string& label, const MetricsReport& r) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-16s %8.4f %8.4f %8.4f %8.2f %8.2f %8.2f", label.c_str(), r.rmse, r.rel, r.mae,
                r.delta_105, r.delta_110, r.delta_125);
  return buf;
}

}  // namespace fdct
