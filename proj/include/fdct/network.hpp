#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fdct/blocks.hpp"
#include "fdct/config.hpp"
#include "fdct/core.hpp"

namespace fdct {

/// The depth-completion network: stride-1 input head, four encoder blocks
/// (each halving resolution), an optional fusion branch of three SFMs, four
/// decoder blocks (each doubling resolution) and a linear 3x3 output head.
///
/// Cross-layer shortcuts (when enabled) feed block k+2 with a one-channel
/// projection of block k's pre-resample map; encoder block 2 reads the head
/// output and decoder block 2 reads the bottleneck.
template <typename Scalar>
class FdctNetwork {
 public:
  static constexpr int kLevels = 4;
  static constexpr int kDivisor = 16;

  /// Everything the backward pass needs from one forward pass.
  struct Tape {
    std::array<FeatureMap<Scalar>, kLevels + 1> depth;  // normalised raw depth per scale
    FeatureMap<Scalar> head_input;
    FeatureMap<Scalar> head_output;
    std::array<typename Ffeb<Scalar>::Cache, kLevels> ffeb;
    std::array<typename ShortcutProjection<Scalar>::Cache, kLevels> enc_shortcut;
    std::array<typename Sfm<Scalar>::Cache, kLevels - 1> sfm;
    std::array<typename Dfcb<Scalar>::Cache, kLevels> dfcb;
    std::array<typename ShortcutProjection<Scalar>::Cache, kLevels> dec_shortcut;
    FeatureMap<Scalar> decoder_output;
    FeatureMap<Scalar> output;  // normalised prediction, 1 channel
  };

  explicit FdctNetwork(const FdctConfig& cfg, std::uint64_t seed = 0);

  const FdctConfig& config() const { return cfg_; }
  const ParameterStore<Scalar>& parameters() const { return params_; }
  ParameterStore<Scalar>& parameters() { return params_; }

  long parameter_count() const { return params_.scalar_count(); }
  /// Scalar counts grouped by block name (the parameter-name prefix).
  std::vector<std::pair<std::string, long>> parameter_breakdown() const;

  /// Normalised single-channel output; pass a tape to enable backward().
  FeatureMap<Scalar> forward(const RgbImage& rgb, const DepthMap& raw_depth, Tape* tape = nullptr) const;

  /// Completed depth in meters (linear head, not clamped).
  DepthMap predict(const RgbImage& rgb, const DepthMap& raw_depth) const;

  /// Accumulates dL/dparams into `grads` given dL/d(predicted meters).
  void backward(const Tape& tape, const DepthMap& d_pred, GradientSet<Scalar>& grads) const;

  /// Throws InputError for bad sizes or non-finite values.
  static void check_input(const RgbImage& rgb, const DepthMap& raw_depth);

  // Read access for wiring audits.
  const Ffeb<Scalar>& ffeb(int i) const { return ffeb_[static_cast<size_t>(i)]; }
  const Dfcb<Scalar>& dfcb(int i) const { return dfcb_[static_cast<size_t>(i)]; }
  const Conv2d<Scalar>& output_head() const { return out_head_; }

 private:
  FdctConfig cfg_;
  ParameterStore<Scalar> params_;
  Conv2d<Scalar> head_;
  std::array<Ffeb<Scalar>, kLevels> ffeb_;
  std::array<std::optional<ShortcutProjection<Scalar>>, kLevels> enc_shortcut_;
  std::array<Sfm<Scalar>, kLevels - 1> sfm_;
  std::array<Dfcb<Scalar>, kLevels> dfcb_;
  std::array<std::optional<ShortcutProjection<Scalar>>, kLevels> dec_shortcut_;
  Conv2d<Scalar> out_head_;
};

/// Block name of a parameter: everything before the first '.'.
std::string block_of(const std::string& parameter_name);

}  // namespace fdct
