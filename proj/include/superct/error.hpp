#pragma once

#include <stdexcept>
#include <string>

namespace superct {

/// Inputs whose shapes disagree (image vs geometry, patch count vs config, ...).
class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid parameters or a malformed configuration document.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Divergence, failed factorization, non-finite values.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Unreadable or corrupt files.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace superct
