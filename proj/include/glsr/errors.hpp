// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace glsr {

// Shape or size disagreement between operands.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid hyperparameter combination (groups, scale, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf where a finite value is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API misuse, e.g. backward from a non-scalar without a seed.
struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

// Weights do not match the layer enumeration of a config.
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed file contents; carries the byte offset of the failure.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset(offset) {}
  std::size_t offset;
};

}  // namespace glsr
