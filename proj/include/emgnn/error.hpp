#pragma once

#include <stdexcept>
#include <string>

namespace emgnn {

/// Tensor or table shapes do not conform.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Enumeration would exceed the configured state-space budget.
struct StateSpaceError : std::length_error {
  using std::length_error::length_error;
};

/// Dataset file violates its schema or invariants.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Run configuration is missing keys, has unknown keys or bad values.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Checkpoint bytes are malformed or fail their checksum.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace emgnn
