#pragma once

#include <string>

#include <json.hpp>

#include "fdct/core.hpp"

namespace fdct {

enum class DownsampleMode { max_pool, avg_pool, strided_conv };
enum class DepthFusionMode { conv_fuse, concat };

std::string to_string(DownsampleMode m);
std::string to_string(DepthFusionMode m);
/// Accepts "max_pool"/"max", "avg_pool"/"avg", "strided_conv"/"conv".
DownsampleMode parse_downsample(const std::string& s);
/// Accepts "conv_fuse"/"conv" and "concat".
DepthFusionMode parse_depth_fusion(const std::string& s);

/// Architecture hyperparameters, including the ablation switches.
struct FdctConfig {
  int channels = 64;
  int osa_layers = 5;
  int osa_stage_channels = 20;
  DownsampleMode downsample = DownsampleMode::max_pool;
  DepthFusionMode depth_fusion = DepthFusionMode::conv_fuse;
  bool use_fusion_branch = true;
  bool use_cross_shortcuts = true;
  double depth_max = 10.0;

  static FdctConfig full() { return {}; }
  static FdctConfig slim() {
    FdctConfig c;
    c.channels = 32;
    c.osa_layers = 4;
    c.osa_stage_channels = 16;
    return c;
  }

  void validate() const;
  bool operator==(const FdctConfig&) const = default;
};

void to_json(nlohmann::json& j, const FdctConfig& c);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
void from_json(const nlohmann::json& j, FdctConfig& c);

}  // namespace fdct
