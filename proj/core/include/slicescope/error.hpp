#pragma once

#include <stdexcept>
#include <string>

namespace slicescope {

// Malformed or invalid input data (files, columns, values). Maps to CLI exit 1.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally valid input but an infeasible or degenerate configuration
// (e.g. k >= n, empty slice budget). Maps to CLI exit 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace slicescope
