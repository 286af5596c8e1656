#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fdct/core.hpp"

namespace fdct {

/// Sufficient statistics of the error over one set of valid pixels. Pooling
/// two sets is elementwise addition, so merge order does not matter.
struct PixelStats {
  long count = 0;
  double sum_sq = 0.0;
  double sum_abs = 0.0;
  double sum_rel = 0.0;
  long within_105 = 0;
  long within_110 = 0;
  long within_125 = 0;

  PixelStats& operator+=(const PixelStats& o);
};

/// Dataset metrics. Threshold ratios are percentages; values are NaN when
/// pixel_count is 0.
struct MetricsReport {
  double rmse = 0.0;
  double rel = 0.0;
  double mae = 0.0;
  double delta_105 = 0.0;
  double delta_110 = 0.0;
  double delta_125 = 0.0;
  long pixel_count = 0;
  /// Samples that contributed at least one valid pixel.
  long sample_count = 0;

  bool defined() const { return pixel_count > 0; }
};

/// Statistics over valid_pixels(gt, mask, range). A ratio max(p/g, g/p)
/// passes threshold t only if it is strictly below t; pred <= 0 never passes.
PixelStats pixel_stats(const DepthMap& pred, const DepthMap& gt, const TransparentMask& mask,
                       const ValidRange& range = {});

MetricsReport report_from(const PixelStats& stats, long sample_count);

MetricsReport compute_metrics(const DepthMap& pred, const DepthMap& gt, const TransparentMask& mask,
                              const ValidRange& range = {});

/// Pixel-pooled metrics across samples (not an average of per-sample metrics).
MetricsReport aggregate(const std::vector<PixelStats>& per_sample);

/// Clamps a prediction into [0, depth_max] before evaluation.
DepthMap clamp_prediction(const DepthMap& pred, double depth_max);

void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);

/// Column header and one aligned row: RMSE REL MAE d1.05 d1.10 d1.25.
std::string metrics_table_header();
std::string metrics_table_row(const std::string& label, const MetricsReport& r);

}  // namespace fdct
