#pragma once

#include <stdexcept>
#include <string>

namespace cadnet {

/// Malformed or inconsistent experiment configuration.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Problems with datasets, image files, or labels.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Model construction failures (shape mismatch, unknown layer, input too small).
struct BuildError : std::runtime_error {
  explicit BuildError(const std::string& what) : std::runtime_error(what) {}
};

/// Weight archive failures (bad magic, version, checksum, shape mismatch).
struct ArchiveError : std::runtime_error {
  explicit ArchiveError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cadnet
