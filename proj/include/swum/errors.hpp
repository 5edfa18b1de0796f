#pragma once

#include <stdexcept>
#include <string>

namespace swum {

// Error families. The CLI maps them onto stable exit codes:
// ConfigError -> 2, DataError / IntegrityError -> 3, NumericError -> 4.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct IntegrityError : DataError {
  using DataError::DataError;
};

struct NumericError : Error {
  using Error::Error;
};

}  // namespace swum
