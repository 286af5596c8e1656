#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fdct/train.hpp"

namespace fdct {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Matrix<float> value;
};

/// Everything needed to rebuild a network and, optionally, resume training.
///
/// On disk: the 8-byte magic "FDCTCKPT", a little-endian u32 format version,
/// a u64 header length, a JSON header (configs, run state, parameter names
/// and shapes), then the raw float32 arrays: parameters, followed by the
/// Adam first and second moments when present.
struct Checkpoint {
  FdctConfig model;
  LossConfig loss;
  TrainConfig train;
  ValidRange range;
  TrainState state;
  std::vector<NamedArray> parameters;
  long adam_t = 0;
  std::vector<Matrix<float>> adam_m;
  std::vector<Matrix<float>> adam_v;

  bool has_optimizer() const { return !adam_m.empty(); }
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws IoError for unreadable or truncated files and for unknown versions.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies the parameters of `net` into a checkpoint body.
std::vector<NamedArray> export_parameters(const ParameterStore<float>& params);

/// Writes checkpoint parameters into `net`. Throws ConfigError unless the
/// checkpoint config equals the network's and every parameter name is
/// present with the expected shape (and no extra names exist).
void import_parameters(const Checkpoint& ckpt, FdctNetwork<float>& net);

/// Network rebuilt from the checkpoint's config and parameters.
FdctNetwork<float> network_from_checkpoint(const Checkpoint& ckpt);

}  // namespace fdct
