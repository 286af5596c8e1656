#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fdct/config.hpp"
#include "fdct/conv.hpp"

namespace fdct {

/// One-shot aggregation: a chain of 3x3 stage convolutions whose outputs,
/// together with the block input, are concatenated once and reduced by a
/// 1x1 convolution. The first `channels` input channels are added back as
/// an identity connection, so wider inputs (concat fusion) are allowed.
template <typename Scalar>
class OsaBlock {
 public:
  struct Cache {
    FeatureMap<Scalar> input;
    std::vector<FeatureMap<Scalar>> stages;
    FeatureMap<Scalar> reduced;
  };

  OsaBlock() = default;
  OsaBlock(ParameterStore<Scalar>& store, const std::string& name, int in_channels, int channels, int layers,
           int stage_channels);

  int in_channels() const { return in_; }
  int channels() const { return channels_; }
  /// Width of the aggregation concat feeding the 1x1 reducer.
  int concat_channels() const { return in_ + static_cast<int>(stages_.size()) * stage_; }
  const Conv2d<Scalar>& reducer() const { return reduce_; }

  FeatureMap<Scalar> forward(const ParameterStore<Scalar>& ps, const FeatureMap<Scalar>& x, Cache* cache) const;
  FeatureMap<Scalar> backward(const ParameterStore<Scalar>& ps, const Cache& cache, const FeatureMap<Scalar>& dy,
                              GradientSet<Scalar>& grads) const;

 private:
  FeatureMap<Scalar> aggregate(const FeatureMap<Scalar>& x, const std::vector<FeatureMap<Scalar>>& stages) const;

  int in_ = 0, channels_ = 0, stage_ = 0;
  std::vector<Conv2d<Scalar>> stages_;
  Conv2d<Scalar> reduce_;
};

/// Factor-2 spatial reduction in one of the three ablation variants.
template <typename Scalar>
class Downsample {
 public:
  struct Cache {
    FeatureMap<Scalar> input;
    FeatureMap<Scalar> output;
    std::vector<std::int32_t> argmax;
  };

  Downsample() = default;
  Downsample(ParameterStore<Scalar>& store, const std::string& name, int channels, DownsampleMode mode);

  DownsampleMode mode() const { return mode_; }
  FeatureMap<Scalar> forward(const ParameterStore<Scalar>& ps, const FeatureMap<Scalar>& x, Cache* cache) const;
  FeatureMap<Scalar> backward(const ParameterStore<Scalar>& ps, const Cache& cache, const FeatureMap<Scalar>& dy,
                              GradientSet<Scalar>& grads) const;

 private:
  DownsampleMode mode_ = DownsampleMode::max_pool;
  Conv2d<Scalar> conv_;
};

/// Feature fusion and extraction block (encoder stage).
///
/// Input concat is [features, depth, shortcut?]. With conv_fuse the concat
/// is fused by a 3x3 convolution down to C channels before the OSA block;
/// with concat the OSA block consumes it directly.
template <typename Scalar>
class Ffeb {
 public:
  struct Output {
    FeatureMap<Scalar> out;
    FeatureMap<Scalar> pre_pool;
  };
  struct Cache {
    FeatureMap<Scalar> input;
    typename OsaBlock<Scalar>::Cache osa;
    typename Downsample<Scalar>::Cache down;
  };
  struct InputGrads {
    FeatureMap<Scalar> features;
    std::optional<FeatureMap<Scalar>> shortcut;
  };

  Ffeb() = default;
  Ffeb(ParameterStore<Scalar>& store, const std::string& name, const FdctConfig& cfg, bool has_shortcut);

  bool has_shortcut() const { return has_shortcut_; }
  int input_concat_channels() const { return cfg_channels_ + 1 + (has_shortcut_ ? 1 : 0); }
  const OsaBlock<Scalar>& osa() const { return osa_; }

  Output forward(const ParameterStore<Scalar>& ps, const FeatureMap<Scalar>& features,
                 const FeatureMap<Scalar>& depth, const FeatureMap<Scalar>* shortcut, Cache* cache) const;
  /// `d_pre_pool` may be empty (zero rows) when nothing consumed pre_pool.
  InputGrads backward(const ParameterStore<Scalar>& ps, const Cache& cache, const FeatureMap<Scalar>& d_out,
                      const FeatureMap<Scalar>& d_pre_pool, GradientSet<Scalar>& grads) const;

 private:
  int cfg_channels_ = 0;
  bool has_shortcut_ = false;
  std::optional<Conv2d<Scalar>> fuse_;
  OsaBlock<Scalar> osa_;
  Downsample<Scalar> down_;
};

/// Shortcut fusion module: max-pools the running fusion-branch map by 2,
/// concatenates the encoder output and mixes channels with a 1x1 conv.
template <typename Scalar>
class Sfm {
 public:
  struct Cache {
    std::vector<std::int32_t> argmax;
    FeatureMap<Scalar> concat;
    FeatureMap<Scalar> output;
  };
  struct InputGrads {
    FeatureMap<Scalar> prev;
    FeatureMap<Scalar> enc_out;
  };

  Sfm() = default;
  Sfm(ParameterStore<Scalar>& store, const std::string& name, int channels);

  const Conv2d<Scalar>& mixer() const { return mix_; }

  FeatureMap<Scalar> forward(const ParameterStore<Scalar>& ps, const FeatureMap<Scalar>& prev,
                             const FeatureMap<Scalar>& enc_out, Cache* cache) const;
  InputGrads backward(const ParameterStore<Scalar>& ps, const Cache& cache, const FeatureMap<Scalar>& dy,
                      GradientSet<Scalar>& grads) const;

 private:
  int channels_ = 0;
  Conv2d<Scalar> mix_;
};

/// Depth fusion and completion block (decoder stage).
///
/// Input concat is [features, fusion?, depth, residual, shortcut?] where the
/// residual is a 1x1 projection of the matching encoder map. After the OSA
/// block a 1x1 conv to 4C channels and a pixel shuffle double the resolution.
template <typename Scalar>
class Dfcb {
 public:
  struct Output {
    FeatureMap<Scalar> out;
    FeatureMap<Scalar> pre_up;
  };
  struct Cache {
    FeatureMap<Scalar> enc;
    FeatureMap<Scalar> residual;
    FeatureMap<Scalar> input;
    typename OsaBlock<Scalar>::Cache osa;
    FeatureMap<Scalar> pre_up;
    FeatureMap<Scalar> expanded;
  };
  struct InputGrads {
    FeatureMap<Scalar> features;
    std::optional<FeatureMap<Scalar>> fusion;
    FeatureMap<Scalar> enc;
    std::optional<FeatureMap<Scalar>> shortcut;
  };

  Dfcb() = default;
  Dfcb(ParameterStore<Scalar>& store, const std::string& name, const FdctConfig& cfg, bool has_shortcut,
       bool has_fusion_input);

  bool has_shortcut() const { return has_shortcut_; }
  bool has_fusion_input() const { return has_fusion_; }
  int input_concat_channels() const {
    return 2 * channels_ + 1 + (has_fusion_ ? channels_ : 0) + (has_shortcut_ ? 1 : 0);
  }

  Output forward(const ParameterStore<Scalar>& ps, const FeatureMap<Scalar>& features,
                 const FeatureMap<Scalar>* fusion, const FeatureMap<Scalar>& depth, const FeatureMap<Scalar>& enc,
                 const FeatureMap<Scalar>* shortcut, Cache* cache) const;
  InputGrads backward(const ParameterStore<Scalar>& ps, const Cache& cache, const FeatureMap<Scalar>& d_out,
                      const FeatureMap<Scalar>& d_pre_up, GradientSet<Scalar>& grads) const;

 private:
  int channels_ = 0;
  bool has_shortcut_ = false, has_fusion_ = false;
  Conv2d<Scalar> residual_;
  std::optional<Conv2d<Scalar>> fuse_;
  OsaBlock<Scalar> osa_;
  Conv2d<Scalar> up_;
};

/// Cross-layer shortcut: 1x1 conv to a single channel, then max-pooled
/// (factor > 1 means downsample) or nearest-upsampled (factor < -1 means
/// upsample by -factor) to the consumer's scale.
template <typename Scalar>
class ShortcutProjection {
 public:
  struct Cache {
    FeatureMap<Scalar> source;
    FeatureMap<Scalar> projected;
    std::vector<std::int32_t> argmax;
  };

  ShortcutProjection() = default;
  ShortcutProjection(ParameterStore<Scalar>& store, const std::string& name, int channels, int resample);

  FeatureMap<Scalar> forward(const ParameterStore<Scalar>& ps, const FeatureMap<Scalar>& src, Cache* cache) const;
  FeatureMap<Scalar> backward(const ParameterStore<Scalar>& ps, const Cache& cache, const FeatureMap<Scalar>& dy,
                              GradientSet<Scalar>& grads) const;

 private:
  Conv2d<Scalar> proj_;
  int resample_ = 1;
};

/// a += b, treating an empty `b` as zero.
template <typename Scalar>
void accumulate(FeatureMap<Scalar>& a, const FeatureMap<Scalar>& b) {
  if (b.values.size() == 0) return;
  if (a.values.size() == 0) {
    a = b;
    return;
  }
  a.values += b.values;
}

}  // namespace fdct
