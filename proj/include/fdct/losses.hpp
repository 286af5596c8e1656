#pragma once

#include <json.hpp>

#include "fdct/core.hpp"

namespace fdct {

/// Weights and constants of the composite objective
///   total = huber + alpha * (1 - ssim) + beta * smooth.
struct LossConfig {
  double delta = 0.1;
  double alpha = 0.1;
  double beta = 0.001;
  double epsilon = 1e-8;
  /// (0.01 * R)^2 and (0.03 * R)^2 with R = 1.5 m, the upper valid depth.
  double c1 = 0.000225;
  double c2 = 0.002025;
  bool edge_weighting = false;
  double edge_blur_sigma = 1.0;

  /// Defaults with the SSIM constants derived from `range.hi`.
  static LossConfig for_range(const ValidRange& range);
  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

void to_json(nlohmann::json& j, const LossConfig& c);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
void from_json(const nlohmann::json& j, LossConfig& c);

struct LossBundle {
  double total = 0.0;
  double huber = 0.0;
  /// 1 - ssim, the minimised structural term.
  double ssim_term = 0.0;
  double smooth = 0.0;
  /// Raw SSIM index, for reporting.
  double ssim = 1.0;
  long valid_pixel_count = 0;
  /// False when the valid set was empty and every component is 0.
  bool active = false;
};

/// Mean Huber penalty over valid pixels (0 when none are valid). Optional
/// per-pixel `weights` multiply each contribution. When `grad` is given,
/// dL/dpred is added into it.
double huber_loss(const DepthMap& pred, const DepthMap& gt, const TransparentMask& valid, double delta,
                  const ImagePlane<double>* weights = nullptr, DepthMap* grad = nullptr);

/// Global (window-free) SSIM index over the valid pixels using population
/// statistics. Returns 1 when fewer than two pixels are valid, so the loss
/// term 1 - ssim vanishes. When `grad` is given, dSSIM/dpred is added into it.
double ssim(const DepthMap& pred, const DepthMap& gt, const TransparentMask& valid, double c1, double c2,
            DepthMap* grad = nullptr);

/// Mean of 1 - cos(normal_pred, normal_gt) over valid pixels, normals taken
/// from the full maps. When `grad` is given, dL/dpred is added into it.
double smooth_loss(const DepthMap& pred, const DepthMap& gt, const TransparentMask& valid, double epsilon,
                   DepthMap* grad = nullptr);

/// Gaussian-blurred gradient magnitude of `gt` (kernel radius ceil(3 sigma),
/// reflect-101 borders).
ImagePlane<double> edge_weight_map(const DepthMap& gt, double sigma);

/// Per-pixel Huber weights 1 / (1 + blurred edge map), rescaled to mean 1
/// over the valid pixels.
ImagePlane<double> huber_edge_weights(const DepthMap& gt, const TransparentMask& valid, double sigma);

/// Full objective on valid_pixels(gt, mask, range). When `grad` is given it
/// is resized to pred's shape and receives d(total)/d(pred).
LossBundle total_loss(const DepthMap& pred, const DepthMap& gt, const TransparentMask& mask, const ValidRange& range,
                      const LossConfig& cfg, DepthMap* grad = nullptr);

/// Adjoint of depth_gradients: maps (dL/dgx, dL/dgy) to dL/ddepth.
ImagePlane<double> depth_gradients_adjoint(const ImagePlane<double>& dgx, const ImagePlane<double>& dgy);

}  // namespace fdct
