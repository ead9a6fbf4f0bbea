// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_ERRORS_HPP
#define AMR_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace amr {

/// Shape of an operand does not match what an operation requires.
class DimensionError : public std::runtime_error {
public:
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration: bad layer wiring, unsupported frame length,
/// missing parameter entries, mismatched checkpoints.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A value-level precondition on an input failed (non-one-hot label,
/// out-of-range sparsity, non-positive step size, ...).
class InputError : public std::runtime_error {
public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A serialized file is malformed. Carries the byte offset of the
/// first inconsistency.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string& msg, std::size_t byte_offset)
      : std::runtime_error(msg + " (at byte offset " +
                           std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}
  std::size_t offset() const { return offset_; }

private:
  std::size_t offset_;
};

/// Training diverged or otherwise failed numerically.
class TrainingError : public std::runtime_error {
public:
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace amr

#endif  // AMR_ERRORS_HPP
