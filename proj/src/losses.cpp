#include "fdct/losses.hpp"

#include <cmath>
#include <vector>

namespace fdct {

namespace {

void check_same(const DepthMap& a, const DepthMap& b, const TransparentMask& m, const char* what) {
  if (a.height() != b.height() || a.width() != b.width() || a.height() != m.height() || a.width() != m.width()) {
    throw DimensionError(std::string(what) + ": prediction, ground truth and mask shapes differ");
  }
}

void ensure_grad(DepthMap* grad, int h, int w) {
  if (grad && (grad->height() != h || grad->width() != w)) *grad = DepthMap(h, w, 0.0);
}

/// Reflect-101 index into [0, n).
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

LossConfig LossConfig::for_range(const ValidRange& range) {
  LossConfig c;
  c.c1 = std::pow(0.01 * range.hi, 2);
  c.c2 = std::pow(0.03 * range.hi, 2);
  return c;
}

void LossConfig::validate() const {
  if (!(delta > 0)) throw ConfigError("loss delta must be positive");
  if (!(alpha >= 0) || !(beta >= 0)) throw ConfigError("loss weights alpha and beta must be non-negative");
  if (!(epsilon > 0) || !(c1 > 0) || !(c2 > 0)) throw ConfigError("epsilon, C1 and C2 must be positive");
  if (edge_weighting && !(edge_blur_sigma > 0)) throw ConfigError("edge_blur_sigma must be positive");
}

void to_json(nlohmann::json& j, const LossConfig& c) {
  j = nlohmann::json{{"delta", c.delta},     {"alpha", c.alpha},
                     {"beta", c.beta},       {"epsilon", c.epsilon},
                     {"c1", c.c1},           {"c2", c.c2},
                     {"edge_weighting", c.edge_weighting}, {"edge_blur_sigma", c.edge_blur_sigma}};
}

void from_json(const nlohmann::json& j, LossConfig& c) {
  for (const auto& [key, value] : j.items()) {
    if (key == "delta") c.delta = value.get<double>();
    else if (key == "alpha") c.alpha = value.get<double>();
    else if (key == "beta") c.beta = value.get<double>();
    else if (key == "epsilon") c.epsilon = value.get<double>();
    else if (key == "c1") c.c1 = value.get<double>();
    else if (key == "c2") c.c2 = value.get<double>();
    else if (key == "edge_weighting") c.edge_weighting = value.get<bool>();
    else if (key == "edge_blur_sigma") c.edge_blur_sigma = value.get<double>();
    else throw ConfigError("unknown loss config key '" + key + "'");
  }
}

double huber_loss(const DepthMap& pred, const DepthMap& gt, const TransparentMask& valid, double delta,
                  const ImagePlane<double>* weights, DepthMap* grad) {
  check_same(pred, gt, valid, "huber_loss");
  const long n = valid.count();
  if (n == 0) return 0.0;
  ensure_grad(grad, pred.height(), pred.width());
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (!valid(y, x)) continue;
      const double e = pred(y, x) - gt(y, x);
      const double ae = std::abs(e);
      const double w = weights ? (*weights)(y, x) : 1.0;
      sum += w * (ae <= delta ? 0.5 * e * e : delta * ae - 0.5 * delta * delta);
      if (grad) (*grad)(y, x) += w * std::clamp(e, -delta, delta) * inv_n;
    }
  }
  return sum * inv_n;
}

double ssim(const DepthMap& pred, const DepthMap& gt, const TransparentMask& valid, double c1, double c2,
            DepthMap* grad) {
  check_same(pred, gt, valid, "ssim");
  const long n = valid.count();
  if (n < 2) return 1.0;
  ensure_grad(grad, pred.height(), pred.width());
  const double inv_n = 1.0 / static_cast<double>(n);

  double sum_p = 0, sum_g = 0;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (!valid(y, x)) continue;
      sum_p += pred(y, x);
      sum_g += gt(y, x);
    }
  }
  const double mu_p = sum_p * inv_n, mu_g = sum_g * inv_n;
  double var_p = 0, var_g = 0, cov = 0;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (!valid(y, x)) continue;
      const double dp = pred(y, x) - mu_p, dg = gt(y, x) - mu_g;
      var_p += dp * dp;
      var_g += dg * dg;
      cov += dp * dg;
    }
  }
  var_p *= inv_n;
  var_g *= inv_n;
  cov *= inv_n;

  const double a = 2 * cov + c2;
  const double b = 2 * mu_g * mu_p + c1;
  const double c = var_g + var_p + c2;
  const double d = mu_g * mu_g + mu_p * mu_p + c1;
  const double s = (a * b) / (c * d);

  if (grad) {
    // dS = S (dA/A + dB/B - dC/C - dD/D), each partial taken w.r.t. pred_i.
    for (int y = 0; y < pred.height(); ++y) {
      for (int x = 0; x < pred.width(); ++x) {
        if (!valid(y, x)) continue;
        const double da = 2 * (gt(y, x) - mu_g) * inv_n;
        const double db = 2 * mu_g * inv_n;
        const double dc = 2 * (pred(y, x) - mu_p) * inv_n;
        const double dd = 2 * mu_p * inv_n;
        (*grad)(y, x) += s * (da / a + db / b - dc / c - dd / d);
      }
    }
  }
  return s;
}

ImagePlane<double> depth_gradients_adjoint(const ImagePlane<double>& dgx, const ImagePlane<double>& dgy) {
  const Eigen::Index h = dgx.rows(), w = dgx.cols();
  ImagePlane<double> out = ImagePlane<double>::Zero(h, w);
  if (w >= 2) {
    for (Eigen::Index y = 0; y < h; ++y) {
      out(y, 1) += dgx(y, 0);
      out(y, 0) -= dgx(y, 0);
      for (Eigen::Index x = 1; x + 1 < w; ++x) {
        out(y, x + 1) += 0.5 * dgx(y, x);
        out(y, x - 1) -= 0.5 * dgx(y, x);
      }
      out(y, w - 1) += dgx(y, w - 1);
      out(y, w - 2) -= dgx(y, w - 1);
    }
  }
  if (h >= 2) {
    for (Eigen::Index x = 0; x < w; ++x) {
      out(1, x) += dgy(0, x);
      out(0, x) -= dgy(0, x);
      for (Eigen::Index y = 1; y + 1 < h; ++y) {
        out(y + 1, x) += 0.5 * dgy(y, x);
        out(y - 1, x) -= 0.5 * dgy(y, x);
      }
      out(h - 1, x) += dgy(h - 1, x);
      out(h - 2, x) -= dgy(h - 1, x);
    }
  }
  return out;
}

double smooth_loss(const DepthMap& pred, const DepthMap& gt, const TransparentMask& valid, double epsilon,
                   DepthMap* grad) {
  check_same(pred, gt, valid, "smooth_loss");
  const long n = valid.count();
  if (n == 0) return 0.0;
  ensure_grad(grad, pred.height(), pred.width());
  const double inv_n = 1.0 / static_cast<double>(n);

  ImagePlane<double> gx, gy;
  depth_gradients(pred.values, gx, gy);
  const NormalMap ng = normals_from_depth(gt);
  ImagePlane<double> dgx, dgy;
  if (grad) {
    dgx.setZero(pred.height(), pred.width());
    dgy.setZero(pred.height(), pred.width());
  }

  double sum = 0.0;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (!valid(y, x)) continue;
      const Eigen::Vector3d u(-gx(y, x), -gy(y, x), 1.0);
      const double len = u.norm();
      const Eigen::Vector3d np = u / len;
      const Eigen::Vector3d g(ng.components[0](y, x), ng.components[1](y, x), ng.components[2](y, x));
      const double denom = std::max(np.norm() * g.norm(), epsilon);
      const double cosine = np.dot(g) / denom;
      sum += 1.0 - cosine;
      if (grad) {
        // d(1 - np.g / denom)/du through the normalisation np = u / |u|.
        const Eigen::Vector3d d_u = -((g - np.dot(g) * np) / (len * denom)) * inv_n;
        dgx(y, x) -= d_u.x();
        dgy(y, x) -= d_u.y();
      }
    }
  }
  if (grad) grad->values += depth_gradients_adjoint(dgx, dgy);
  return sum * inv_n;
}

ImagePlane<double> edge_weight_map(const DepthMap& gt, double sigma) {
  if (!(sigma > 0)) throw ConfigError("edge blur sigma must be positive");
  ImagePlane<double> gx, gy;
  depth_gradients(gt.values, gx, gy);
  const ImagePlane<double> mag = (gx.square() + gy.square()).sqrt();

  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double total = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[static_cast<size_t>(i + radius)];
  }
  for (double& k : kernel) k /= total;

  const int h = gt.height(), w = gt.width();
  ImagePlane<double> tmp = ImagePlane<double>::Zero(h, w), out = ImagePlane<double>::Zero(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[static_cast<size_t>(i + radius)] * mag(y, reflect(x + i, w));
      tmp(y, x) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[static_cast<size_t>(i + radius)] * tmp(reflect(y + i, h), x);
      out(y, x) = acc;
    }
  }
  return out;
}

ImagePlane<double> huber_edge_weights(const DepthMap& gt, const TransparentMask& valid, double sigma) {
  ImagePlane<double> w = (1.0 + edge_weight_map(gt, sigma)).inverse();
  const long n = valid.count();
  if (n > 0) {
    const double mean = valid.values.select(w, 0.0).sum() / static_cast<double>(n);
    w /= mean;
  }
  return w;
}

LossBundle total_loss(const DepthMap& pred, const DepthMap& gt, const TransparentMask& mask, const ValidRange& range,
                      const LossConfig& cfg, DepthMap* grad) {
  const TransparentMask valid = valid_pixels(gt, mask, range);
  check_same(pred, gt, valid, "total_loss");
  if (grad) *grad = DepthMap(pred.height(), pred.width(), 0.0);

  LossBundle b;
  b.valid_pixel_count = valid.count();
  if (b.valid_pixel_count == 0) return b;
  b.active = true;

  ImagePlane<double> weights;
  if (cfg.edge_weighting) weights = huber_edge_weights(gt, valid, cfg.edge_blur_sigma);

  b.huber = huber_loss(pred, gt, valid, cfg.delta, cfg.edge_weighting ? &weights : nullptr, grad);

  DepthMap ssim_grad;
  DepthMap* ssim_grad_ptr = nullptr;
  if (grad && cfg.alpha != 0.0) {
    ssim_grad = DepthMap(pred.height(), pred.width(), 0.0);
    ssim_grad_ptr = &ssim_grad;
  }
  b.ssim = ssim(pred, gt, valid, cfg.c1, cfg.c2, ssim_grad_ptr);
  b.ssim_term = 1.0 - b.ssim;

  DepthMap smooth_grad;
  DepthMap* smooth_grad_ptr = nullptr;
  if (grad && cfg.beta != 0.0) {
    smooth_grad = DepthMap(pred.height(), pred.width(), 0.0);
    smooth_grad_ptr = &smooth_grad;
  }
  b.smooth = smooth_loss(pred, gt, valid, cfg.epsilon, smooth_grad_ptr);

  b.total = b.huber + cfg.alpha * b.ssim_term + cfg.beta * b.smooth;
  if (grad) {
    if (ssim_grad_ptr) grad->values -= cfg.alpha * ssim_grad.values;
    if (smooth_grad_ptr) grad->values += cfg.beta * smooth_grad.values;
  }
  return b;
}

}  // namespace fdct
