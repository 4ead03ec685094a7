#pragma once

#include <stdexcept>
#include <string>

namespace deepi2i {

/// Invalid architecture / run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor shape or level mismatch between producer and consumer.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dataset ingestion problems (missing class dirs, undecodable files, ...).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unreadable, truncated or incompatible checkpoint files.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace deepi2i
