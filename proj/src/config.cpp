#include "fdct/config.hpp"

#include "fdct/errors.hpp"

namespace fdct {

std::string to_string(DownsampleMode m) {
  switch (m) {
    case DownsampleMode::max_pool: return "max_pool";
    case DownsampleMode::avg_pool: return "avg_pool";
    case DownsampleMode::strided_conv: return "strided_conv";
  }
  return "?";
}

std::string to_string(DepthFusionMode m) {
  return m == DepthFusionMode::conv_fuse ? "conv_fuse" : "concat";
}

DownsampleMode parse_downsample(const std::string& s) {
  if (s == "max_pool" || s == "max") return DownsampleMode::max_pool;
  if (s == "avg_pool" || s == "avg") return DownsampleMode::avg_pool;
  if (s == "strided_conv" || s == "conv") return DownsampleMode::strided_conv;
  throw ConfigError("unknown downsample mode '" + s + "'");
}

DepthFusionMode parse_depth_fusion(const std::string& s) {
  if (s == "conv_fuse" || s == "conv") return DepthFusionMode::conv_fuse;
  if (s == "concat") return DepthFusionMode::concat;
  throw ConfigError("unknown depth fusion mode '" + s + "'");
}

void FdctConfig::validate() const {
  if (channels < 1 || osa_layers < 1 || osa_stage_channels < 1) {
    throw ConfigError("channels, osa_layers and osa_stage_channels must all be >= 1");
  }
  if (!(depth_max > 0.0)) throw ConfigError("depth_max must be positive");
}

void to_json(nlohmann::json& j, const FdctConfig& c) {
  j = nlohmann::json{{"channels", c.channels},
                     {"osa_layers", c.osa_layers},
                     {"osa_stage_channels", c.osa_stage_channels},
                     {"downsample", to_string(c.downsample)},
                     {"depth_fusion", to_string(c.depth_fusion)},
                     {"use_fusion_branch", c.use_fusion_branch},
                     {"use_cross_shortcuts", c.use_cross_shortcuts},
                     {"depth_max", c.depth_max}};
}

void from_json(const nlohmann::json& j, FdctConfig& c) {
  for (const auto& [key, value] : j.items()) {
    if (key == "channels") c.channels = value.get<int>();
    else if (key == "osa_layers") c.osa_layers = value.get<int>();
    else if (key == "osa_stage_channels") c.osa_stage_channels = value.get<int>();
    else if (key == "downsample") c.downsample = parse_downsample(value.get<std::string>());
    else if (key == "depth_fusion") c.depth_fusion = parse_depth_fusion(value.get<std::string>());
    else if (key == "use_fusion_branch") c.use_fusion_branch = value.get<bool>();
    else if (key == "use_cross_shortcuts") c.use_cross_shortcuts = value.get<bool>();
    else if (key == "depth_max") c.depth_max = value.get<double>();
    else throw ConfigError("unknown model config key '" + key + "'");
  }
}

}  // namespace fdct
