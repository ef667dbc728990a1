#pragma once

#include <stdexcept>
#include <string>

namespace layerfuse {

/// An estimator produced or would produce a non-finite or undefined result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, configs, dimensions).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace layerfuse
