#pragma once

#include <stdexcept>
#include <string>

namespace fdct {

/// Invalid hyperparameter or configuration value.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Tensors or images whose shapes do not line up.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Malformed network input (bad size, non-finite values).
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A dataset that is structurally valid on disk but unusable.
struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a training step produces a non-finite loss.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fdct
