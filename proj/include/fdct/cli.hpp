#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fdct/config.hpp"
#include "fdct/losses.hpp"
#include "fdct/train.hpp"

namespace fdct {

/// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `fdct` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

/// Parses "HxW"; both sides must be positive multiples of 16.
std::pair<int, int> parse_size(const std::string& text);

/// Flat config document: every key belongs to the model, loss or train
/// key set. Unknown keys raise ConfigError naming the key.
struct ResolvedConfig {
  FdctConfig model;
  LossConfig loss;
  TrainConfig train;
};

void apply_flat_config(const nlohmann::json& flat, ResolvedConfig& cfg);
nlohmann::json to_flat_json(const ResolvedConfig& cfg);
ResolvedConfig read_config_file(const std::string& path);

}  // namespace fdct
