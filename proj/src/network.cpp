#include "fdct/network.hpp"

#include <map>

namespace fdct {

std::string block_of(const std::string& parameter_name) {
  return parameter_name.substr(0, parameter_name.find('.'));
}

template <typename Scalar>
FdctNetwork<Scalar>::FdctNetwork(const FdctConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  const int c = cfg_.channels;
  const bool sc = cfg_.use_cross_shortcuts;
  head_ = Conv2d<Scalar>(params_, "head", 4, c, 3);
  for (int k = 0; k < kLevels; ++k) {
    const std::string name = "ffeb" + std::to_string(k + 1);
    const bool has_sc = sc && k >= 1;
    // Block 2 reads the full-resolution head (pool 2); later blocks read
    // block k-2, two scales up (pool 4).
    if (has_sc) enc_shortcut_[k].emplace(params_, "sc_" + name, c, k == 1 ? 2 : 4);
    ffeb_[k] = Ffeb<Scalar>(params_, name, cfg_, has_sc);
  }
  if (cfg_.use_fusion_branch) {
    for (int j = 0; j < kLevels - 1; ++j) sfm_[j] = Sfm<Scalar>(params_, "sfm" + std::to_string(j + 1), c);
  }
  for (int k = 0; k < kLevels; ++k) {
    const std::string name = "dfcb" + std::to_string(k + 1);
    const bool has_sc = sc && k >= 1;
    if (has_sc) dec_shortcut_[k].emplace(params_, "sc_" + name, c, k == 1 ? -2 : -4);
    dfcb_[k] = Dfcb<Scalar>(params_, name, cfg_, has_sc, cfg_.use_fusion_branch && k == 0);
  }
  out_head_ = Conv2d<Scalar>(params_, "out_head", c, 1, 3, 1, Activation::linear);
  params_.initialize(seed);
}

template <typename Scalar>
std::vector<std::pair<std::string, long>> FdctNetwork<Scalar>::parameter_breakdown() const {
  std::vector<std::pair<std::string, long>> out;
  for (const auto& p : params_) {
    const std::string block = block_of(p.name);
    if (out.empty() || out.back().first != block) out.emplace_back(block, 0);
    out.back().second += static_cast<long>(p.size());
  }
  return out;
}

template <typename Scalar>
void FdctNetwork<Scalar>::check_input(const RgbImage& rgb, const DepthMap& raw_depth) {
  const int h = raw_depth.height(), w = raw_depth.width();
  if (rgb.height() != h || rgb.width() != w) throw InputError("rgb and depth shapes differ");
  if (h < kDivisor || w < kDivisor || h % kDivisor != 0 || w % kDivisor != 0) {
    throw InputError("input size " + std::to_string(h) + "x" + std::to_string(w) +
                     " must be at least 16 and divisible by 16");
  }
  if (!raw_depth.values.allFinite()) throw InputError("raw depth contains non-finite values");
  for (const auto& ch : rgb.channels) {
    if (!ch.allFinite()) throw InputError("rgb contains non-finite values");
  }
}

template <typename Scalar>
FeatureMap<Scalar> FdctNetwork<Scalar>::forward(const RgbImage& rgb, const DepthMap& raw_depth, Tape* tape) const {
  check_input(rgb, raw_depth);
  const int h = raw_depth.height(), w = raw_depth.width();
  const ImagePlane<double> normalized = normalize_depth(raw_depth, cfg_.depth_max);

  std::array<FeatureMap<Scalar>, kLevels + 1> depth;
  for (int k = 0; k <= kLevels; ++k) {
    const int s = 1 << k;
    depth[k] = from_plane<Scalar>(resize_nearest(normalized, h / s, w / s), s);
  }

  FeatureMap<Scalar> head_input(4, h, w);
  for (int c = 0; c < 3; ++c) head_input.plane(c) = rgb.channels[c].template cast<Scalar>();
  head_input.values.row(3) = depth[0].values.row(0);
  FeatureMap<Scalar> head_output = head_.forward(params_, head_input);

  // Encoder.
  std::array<typename Ffeb<Scalar>::Output, kLevels> enc;
  for (int k = 0; k < kLevels; ++k) {
    FeatureMap<Scalar> shortcut;
    if (enc_shortcut_[k]) {
      const FeatureMap<Scalar>& src = k == 1 ? head_output : enc[k - 2].pre_pool;
      shortcut = enc_shortcut_[k]->forward(params_, src, tape ? &tape->enc_shortcut[k] : nullptr);
    }
    const FeatureMap<Scalar>& features = k == 0 ? head_output : enc[k - 1].out;
    enc[k] = ffeb_[k].forward(params_, features, depth[k], enc_shortcut_[k] ? &shortcut : nullptr,
                              tape ? &tape->ffeb[k] : nullptr);
  }
  const FeatureMap<Scalar>& bottleneck = enc[kLevels - 1].out;

  // Fusion branch over the four encoder outputs, ending at the bottleneck scale.
  FeatureMap<Scalar> fusion;
  if (cfg_.use_fusion_branch) {
    fusion = enc[0].out;
    for (int j = 0; j < kLevels - 1; ++j) {
      fusion = sfm_[j].forward(params_, fusion, enc[j + 1].out, tape ? &tape->sfm[j] : nullptr);
    }
  }

  // Decoder. Block k consumes the encoder map at its own input scale: the
  // bottleneck for k = 0, then pre-pool maps of encoder blocks 4, 3, 2.
  std::array<typename Dfcb<Scalar>::Output, kLevels> dec;
  for (int k = 0; k < kLevels; ++k) {
    FeatureMap<Scalar> shortcut;
    if (dec_shortcut_[k]) {
      const FeatureMap<Scalar>& src = k == 1 ? bottleneck : dec[k - 2].pre_up;
      shortcut = dec_shortcut_[k]->forward(params_, src, tape ? &tape->dec_shortcut[k] : nullptr);
    }
    const FeatureMap<Scalar>& features = k == 0 ? bottleneck : dec[k - 1].out;
    const FeatureMap<Scalar>& enc_map = k == 0 ? bottleneck : enc[kLevels - k].pre_pool;
    dec[k] = dfcb_[k].forward(params_, features, dfcb_[k].has_fusion_input() ? &fusion : nullptr,
                              depth[kLevels - k], enc_map, dec_shortcut_[k] ? &shortcut : nullptr,
                              tape ? &tape->dfcb[k] : nullptr);
  }

  FeatureMap<Scalar> output = out_head_.forward(params_, dec[kLevels - 1].out);
  if (tape) {
    tape->depth = std::move(depth);
    tape->head_input = std::move(head_input);
    tape->head_output = std::move(head_output);
    tape->decoder_output = std::move(dec[kLevels - 1].out);
    tape->output = output;
  }
  return output;
}

template <typename Scalar>
DepthMap FdctNetwork<Scalar>::predict(const RgbImage& rgb, const DepthMap& raw_depth) const {
  const FeatureMap<Scalar> out = forward(rgb, raw_depth);
  return DepthMap(out.plane(0).template cast<double>() * cfg_.depth_max);
}

template <typename Scalar>
void FdctNetwork<Scalar>::backward(const Tape& tape, const DepthMap& d_pred, GradientSet<Scalar>& grads) const {
  if (grads.size() != static_cast<size_t>(params_.size())) throw ConfigError("gradient set does not match network");
  const FeatureMap<Scalar>& out = tape.output;
  if (d_pred.height() != out.height || d_pred.width() != out.width) {
    throw DimensionError("backward: loss gradient shape does not match the prediction");
  }
  FeatureMap<Scalar> d_output = like(out, 1);
  d_output.plane(0) = (d_pred.values * cfg_.depth_max).template cast<Scalar>();

  FeatureMap<Scalar> d_dec = out_head_.backward(params_, tape.decoder_output, out, d_output, grads);

  std::array<FeatureMap<Scalar>, kLevels> d_enc_out, d_enc_pre, d_dec_pre;
  FeatureMap<Scalar> d_fusion, d_head;

  for (int k = kLevels - 1; k >= 0; --k) {
    auto g = dfcb_[k].backward(params_, tape.dfcb[k], d_dec, d_dec_pre[k], grads);
    if (k == 0) accumulate(d_enc_out[kLevels - 1], g.features);
    else d_dec = std::move(g.features);
    if (g.fusion) d_fusion = std::move(*g.fusion);
    if (k == 0) accumulate(d_enc_out[kLevels - 1], g.enc);
    else accumulate(d_enc_pre[kLevels - k], g.enc);
    if (g.shortcut) {
      FeatureMap<Scalar> d_src = dec_shortcut_[k]->backward(params_, tape.dec_shortcut[k], *g.shortcut, grads);
      if (k == 1) accumulate(d_enc_out[kLevels - 1], d_src);
      else accumulate(d_dec_pre[k - 2], d_src);
    }
  }

  if (cfg_.use_fusion_branch) {
    for (int j = kLevels - 2; j >= 0; --j) {
      auto g = sfm_[j].backward(params_, tape.sfm[j], d_fusion, grads);
      accumulate(d_enc_out[j + 1], g.enc_out);
      d_fusion = std::move(g.prev);
    }
    accumulate(d_enc_out[0], d_fusion);
  }

  for (int k = kLevels - 1; k >= 0; --k) {
    auto g = ffeb_[k].backward(params_, tape.ffeb[k], d_enc_out[k], d_enc_pre[k], grads);
    if (k == 0) accumulate(d_head, g.features);
    else accumulate(d_enc_out[k - 1], g.features);
    if (g.shortcut) {
      FeatureMap<Scalar> d_src = enc_shortcut_[k]->backward(params_, tape.enc_shortcut[k], *g.shortcut, grads);
      if (k == 1) accumulate(d_head, d_src);
      else accumulate(d_enc_pre[k - 2], d_src);
    }
  }

  head_.backward(params_, tape.head_input, tape.head_output, d_head, grads, false);
}

template class FdctNetwork<float>;
template class FdctNetwork<double>;

}  // namespace fdct
