#include "fdct/blocks.hpp"

namespace fdct {

// ---------------------------------------------------------------- OsaBlock

template <typename Scalar>
OsaBlock<Scalar>::OsaBlock(ParameterStore<Scalar>& store, const std::string& name, int in_channels, int channels,
                           int layers, int stage_channels)
    : in_(in_channels), channels_(channels), stage_(stage_channels) {
  if (in_channels < channels) throw ConfigError(name + ": OSA input narrower than its output");
  int prev = in_channels;
  for (int i = 0; i < layers; ++i) {
    stages_.emplace_back(store, name + ".stage" + std::to_string(i), prev, stage_channels, 3);
    prev = stage_channels;
  }
  reduce_ = Conv2d<Scalar>(store, name + ".reduce", concat_channels(), channels, 1);
}

template <typename Scalar>
FeatureMap<Scalar> OsaBlock<Scalar>::aggregate(const FeatureMap<Scalar>& x,
                                               const std::vector<FeatureMap<Scalar>>& stages) const {
  std::vector<FeatureRef<Scalar>> parts{std::cref(x)};
  for (const auto& s : stages) parts.push_back(std::cref(s));
  return fdct::concat_channels(parts);
}

template <typename Scalar>
FeatureMap<Scalar> OsaBlock<Scalar>::forward(const ParameterStore<Scalar>& ps, const FeatureMap<Scalar>& x,
                                             Cache* cache) const {
  if (x.channels() != in_) {
    throw ConfigError("OSA block expects " + std::to_string(in_) + " channels, got " + std::to_string(x.channels()));
  }
  std::vector<FeatureMap<Scalar>> stages;
  stages.reserve(stages_.size());
  for (size_t i = 0; i < stages_.size(); ++i) stages.push_back(stages_[i].forward(ps, i == 0 ? x : stages.back()));
  FeatureMap<Scalar> reduced = reduce_.forward(ps, aggregate(x, stages));
  FeatureMap<Scalar> out = reduced;
  out.values += x.values.topRows(channels_);
  if (cache) {
    cache->input = x;
    cache->stages = std::move(stages);
    cache->reduced = std::move(reduced);
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> OsaBlock<Scalar>::backward(const ParameterStore<Scalar>& ps, const Cache& cache,
                                              const FeatureMap<Scalar>& dy, GradientSet<Scalar>& grads) const {
  const FeatureMap<Scalar>& x = cache.input;
  const FeatureMap<Scalar> d_agg = reduce_.backward(ps, aggregate(x, cache.stages), cache.reduced, dy, grads);
  FeatureMap<Scalar> dx = slice_channels(d_agg, 0, in_);
  dx.values.topRows(channels_) += dy.values;
  FeatureMap<Scalar> d_next;
  for (int i = static_cast<int>(stages_.size()) - 1; i >= 0; --i) {
    FeatureMap<Scalar> ds = slice_channels(d_agg, in_ + i * stage_, stage_);
    accumulate(ds, d_next);
    const FeatureMap<Scalar>& input = i == 0 ? x : cache.stages[static_cast<size_t>(i - 1)];
    FeatureMap<Scalar> d_in = stages_[static_cast<size_t>(i)].backward(ps, input, cache.stages[static_cast<size_t>(i)],
                                                                     std::move(ds), grads);
    if (i == 0) dx.values += d_in.values;
    else d_next = std::move(d_in);
  }
  return dx;
}

// -------------------------------------------------------------- Downsample

template <typename Scalar>
Downsample<Scalar>::Downsample(ParameterStore<Scalar>& store, const std::string& name, int channels,
                               DownsampleMode mode)
    : mode_(mode) {
  if (mode == DownsampleMode::strided_conv) {
    conv_ = Conv2d<Scalar>(store, name, channels, channels, 3, 2, Activation::linear);
  }
}

template <typename Scalar>
FeatureMap<Scalar> Downsample<Scalar>::forward(const ParameterStore<Scalar>& ps, const FeatureMap<Scalar>& x,
                                               Cache* cache) const {
  switch (mode_) {
    case DownsampleMode::max_pool:
      return max_pool(x, 2, cache ? &cache->argmax : nullptr);
    case DownsampleMode::avg_pool:
      return avg_pool(x, 2);
    case DownsampleMode::strided_conv: {
      check_poolable(x.height, x.width, 2);
      FeatureMap<Scalar> y = conv_.forward(ps, x);
      if (cache) {
        cache->input = x;
        cache->output = y;
      }
      return y;
    }
  }
  return {};
}

template <typename Scalar>
FeatureMap<Scalar> Downsample<Scalar>::backward(const ParameterStore<Scalar>& ps, const Cache& cache,
                                                const FeatureMap<Scalar>& dy, GradientSet<Scalar>& grads) const {
  switch (mode_) {
    case DownsampleMode::max_pool: return max_pool_backward(dy, cache.argmax, 2);
    case DownsampleMode::avg_pool: return avg_pool_backward(dy, 2);
    case DownsampleMode::strided_conv: return conv_.backward(ps, cache.input, cache.output, dy, grads);
  }
  return {};
}

// -------------------------------------------------------------------- Ffeb

template <typename Scalar>
Ffeb<Scalar>::Ffeb(ParameterStore<Scalar>& store, const std::string& name, const FdctConfig& cfg, bool has_shortcut)
    : cfg_channels_(cfg.channels), has_shortcut_(has_shortcut) {
  const int concat = input_concat_channels();
  int osa_in = concat;
  if (cfg.depth_fusion == DepthFusionMode::conv_fuse) {
    fuse_.emplace(store, name + ".fuse", concat, cfg.channels, 3);
    osa_in = cfg.channels;
  }
  osa_ = OsaBlock<Scalar>(store, name + ".osa", osa_in, cfg.channels, cfg.osa_layers, cfg.osa_stage_channels);
  down_ = Downsample<Scalar>(store, name + ".down", cfg.channels, cfg.downsample);
}

template <typename Scalar>
typename Ffeb<Scalar>::Output Ffeb<Scalar>::forward(const ParameterStore<Scalar>& ps,
                                                    const FeatureMap<Scalar>& features,
                                                    const FeatureMap<Scalar>& depth,
                                                    const FeatureMap<Scalar>* shortcut, Cache* cache) const {
  if (features.channels() != cfg_channels_) {
    throw ConfigError("FFEB expects " + std::to_string(cfg_channels_) + " feature channels, got " +
                      std::to_string(features.channels()));
  }
  if (has_shortcut_ != (shortcut != nullptr)) throw ConfigError("FFEB shortcut wiring mismatch");
  std::vector<FeatureRef<Scalar>> parts{std::cref(features), std::cref(depth)};
  if (shortcut) parts.push_back(std::cref(*shortcut));
  FeatureMap<Scalar> input = concat_channels(parts);
  Output result;
  typename OsaBlock<Scalar>::Cache* osa_cache = cache ? &cache->osa : nullptr;
  if (fuse_) {
    result.pre_pool = osa_.forward(ps, fuse_->forward(ps, input), osa_cache);
  } else {
    result.pre_pool = osa_.forward(ps, input, osa_cache);
  }
  result.out = down_.forward(ps, result.pre_pool, cache ? &cache->down : nullptr);
  if (cache) cache->input = std::move(input);
  return result;
}

template <typename Scalar>
typename Ffeb<Scalar>::InputGrads Ffeb<Scalar>::backward(const ParameterStore<Scalar>& ps, const Cache& cache,
                                                         const FeatureMap<Scalar>& d_out,
                                                         const FeatureMap<Scalar>& d_pre_pool,
                                                         GradientSet<Scalar>& grads) const {
  FeatureMap<Scalar> d_pre = down_.backward(ps, cache.down, d_out, grads);
  accumulate(d_pre, d_pre_pool);
  FeatureMap<Scalar> d_osa_in = osa_.backward(ps, cache.osa, d_pre, grads);
  const FeatureMap<Scalar> d_in =
      fuse_ ? fuse_->backward(ps, cache.input, cache.osa.input, std::move(d_osa_in), grads) : std::move(d_osa_in);
  InputGrads g;
  g.features = slice_channels(d_in, 0, cfg_channels_);
  if (has_shortcut_) g.shortcut = slice_channels(d_in, cfg_channels_ + 1, 1);
  return g;
}

// --------------------------------------------------------------------- Sfm

template <typename Scalar>
Sfm<Scalar>::Sfm(ParameterStore<Scalar>& store, const std::string& name, int channels)
    : channels_(channels), mix_(store, name + ".mix", 2 * channels, channels, 1) {}

template <typename Scalar>
FeatureMap<Scalar> Sfm<Scalar>::forward(const ParameterStore<Scalar>& ps, const FeatureMap<Scalar>& prev,
                                        const FeatureMap<Scalar>& enc_out, Cache* cache) const {
  if (prev.height != 2 * enc_out.height || prev.width != 2 * enc_out.width) {
    throw DimensionError("SFM: previous map " + std::to_string(prev.height) + "x" + std::to_string(prev.width) +
                         " is not twice the encoder map " + std::to_string(enc_out.height) + "x" +
                         std::to_string(enc_out.width));
  }
  std::vector<std::int32_t> argmax;
  const FeatureMap<Scalar> pooled = max_pool(prev, 2, &argmax);
  FeatureMap<Scalar> concat = concat_channels<Scalar>({std::cref(pooled), std::cref(enc_out)});
  FeatureMap<Scalar> out = mix_.forward(ps, concat);
  if (cache) {
    cache->argmax = std::move(argmax);
    cache->concat = std::move(concat);
    cache->output = out;
  }
  return out;
}

template <typename Scalar>
typename Sfm<Scalar>::InputGrads Sfm<Scalar>::backward(const ParameterStore<Scalar>& ps, const Cache& cache,
                                                       const FeatureMap<Scalar>& dy,
                                                       GradientSet<Scalar>& grads) const {
  const FeatureMap<Scalar> d_cat = mix_.backward(ps, cache.concat, cache.output, dy, grads);
  return {max_pool_backward(slice_channels(d_cat, 0, channels_), cache.argmax, 2),
          slice_channels(d_cat, channels_, channels_)};
}

// -------------------------------------------------------------------- Dfcb

template <typename Scalar>
Dfcb<Scalar>::Dfcb(ParameterStore<Scalar>& store, const std::string& name, const FdctConfig& cfg,
                   bool has_shortcut, bool has_fusion_input)
    : channels_(cfg.channels), has_shortcut_(has_shortcut), has_fusion_(has_fusion_input) {
  residual_ = Conv2d<Scalar>(store, name + ".residual", channels_, channels_, 1, 1, Activation::linear);
  const int concat = input_concat_channels();
  int osa_in = concat;
  if (cfg.depth_fusion == DepthFusionMode::conv_fuse) {
    fuse_.emplace(store, name + ".fuse", concat, channels_, 3);
    osa_in = channels_;
  }
  osa_ = OsaBlock<Scalar>(store, name + ".osa", osa_in, channels_, cfg.osa_layers, cfg.osa_stage_channels);
  up_ = Conv2d<Scalar>(store, name + ".up", channels_, 4 * channels_, 1, 1, Activation::linear);
}

template <typename Scalar>
typename Dfcb<Scalar>::Output Dfcb<Scalar>::forward(const ParameterStore<Scalar>& ps,
                                                    const FeatureMap<Scalar>& features,
                                                    const FeatureMap<Scalar>* fusion,
                                                    const FeatureMap<Scalar>& depth, const FeatureMap<Scalar>& enc,
                                                    const FeatureMap<Scalar>* shortcut, Cache* cache) const {
  if (features.channels() != channels_) {
    throw ConfigError("DFCB expects " + std::to_string(channels_) + " feature channels, got " +
                      std::to_string(features.channels()));
  }
  if (has_shortcut_ != (shortcut != nullptr)) throw ConfigError("DFCB shortcut wiring mismatch");
  if (has_fusion_ != (fusion != nullptr)) throw ConfigError("DFCB fusion-branch wiring mismatch");
  FeatureMap<Scalar> residual = residual_.forward(ps, enc);
  std::vector<FeatureRef<Scalar>> parts{std::cref(features)};
  if (fusion) parts.push_back(std::cref(*fusion));
  parts.push_back(std::cref(depth));
  parts.push_back(std::cref(residual));
  if (shortcut) parts.push_back(std::cref(*shortcut));
  FeatureMap<Scalar> input = concat_channels(parts);

  typename OsaBlock<Scalar>::Cache* osa_cache = cache ? &cache->osa : nullptr;
  Output result;
  result.pre_up = fuse_ ? osa_.forward(ps, fuse_->forward(ps, input), osa_cache) : osa_.forward(ps, input, osa_cache);
  FeatureMap<Scalar> expanded = up_.forward(ps, result.pre_up);
  result.out = pixel_shuffle(expanded, 2);
  if (cache) {
    cache->enc = enc;
    cache->residual = std::move(residual);
    cache->input = std::move(input);
    cache->pre_up = result.pre_up;
    cache->expanded = std::move(expanded);
  }
  return result;
}

template <typename Scalar>
typename Dfcb<Scalar>::InputGrads Dfcb<Scalar>::backward(const ParameterStore<Scalar>& ps, const Cache& cache,
                                                         const FeatureMap<Scalar>& d_out,
                                                         const FeatureMap<Scalar>& d_pre_up,
                                                         GradientSet<Scalar>& grads) const {
  FeatureMap<Scalar> d_pre = up_.backward(ps, cache.pre_up, cache.expanded, pixel_unshuffle(d_out, 2), grads);
  accumulate(d_pre, d_pre_up);
  FeatureMap<Scalar> d_osa_in = osa_.backward(ps, cache.osa, d_pre, grads);
  const FeatureMap<Scalar> d_in =
      fuse_ ? fuse_->backward(ps, cache.input, cache.osa.input, std::move(d_osa_in), grads) : std::move(d_osa_in);

  InputGrads g;
  int row = 0;
  g.features = slice_channels(d_in, row, channels_);
  row += channels_;
  if (has_fusion_) {
    g.fusion = slice_channels(d_in, row, channels_);
    row += channels_;
  }
  row += 1;  // depth
  FeatureMap<Scalar> d_res = slice_channels(d_in, row, channels_);
  row += channels_;
  if (has_shortcut_) g.shortcut = slice_channels(d_in, row, 1);
  g.enc = residual_.backward(ps, cache.enc, cache.residual, std::move(d_res), grads);
  return g;
}

// ------------------------------------------------------ ShortcutProjection

template <typename Scalar>
ShortcutProjection<Scalar>::ShortcutProjection(ParameterStore<Scalar>& store, const std::string& name, int channels,
                                               int resample)
    : proj_(store, name, channels, 1, 1, 1, Activation::linear), resample_(resample) {}

template <typename Scalar>
FeatureMap<Scalar> ShortcutProjection<Scalar>::forward(const ParameterStore<Scalar>& ps,
                                                       const FeatureMap<Scalar>& src, Cache* cache) const {
  FeatureMap<Scalar> projected = proj_.forward(ps, src);
  FeatureMap<Scalar> out;
  std::vector<std::int32_t> argmax;
  if (resample_ > 1) out = max_pool(projected, resample_, &argmax);
  else if (resample_ < -1) out = upsample_nearest(projected, -resample_);
  else out = projected;
  if (cache) {
    cache->source = src;
    cache->projected = std::move(projected);
    cache->argmax = std::move(argmax);
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> ShortcutProjection<Scalar>::backward(const ParameterStore<Scalar>& ps, const Cache& cache,
                                                        const FeatureMap<Scalar>& dy,
                                                        GradientSet<Scalar>& grads) const {
  FeatureMap<Scalar> d_proj;
  if (resample_ > 1) d_proj = max_pool_backward(dy, cache.argmax, resample_);
  else if (resample_ < -1) d_proj = upsample_nearest_backward(dy, -resample_);
  else d_proj = dy;
  return proj_.backward(ps, cache.source, cache.projected, std::move(d_proj), grads);
}

template class OsaBlock<float>;
template class OsaBlock<double>;
template class Downsample<float>;
template class Downsample<double>;
template class Ffeb<float>;
template class Ffeb<double>;
template class Sfm<float>;
template class Sfm<double>;
template class Dfcb<float>;
template class Dfcb<double>;
template class ShortcutProjection<float>;
template class ShortcutProjection<double>;

}  // namespace fdct
