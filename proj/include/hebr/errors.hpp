#pragma once

#include <stdexcept>
#include <string>

namespace hebr {

/// Invalid configuration document or checkpoint (CLI exit code 2).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CLI exit code 3).
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite value produced where a finite one was required (CLI exit code 4).
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dimension mismatch between operands.
struct shape_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace hebr
