#pragma once

#include <stdexcept>
#include <string>

namespace reclink {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input from the caller: missing files, malformed tables, unknown
// columns, invalid options. The CLI maps these to exit code 1.
class UserError : public Error {
 public:
  using Error::Error;
};

// Failure of an embedding provider (HTTP, malformed body, dimension drift).
// The CLI maps these to exit code 2.
class ProviderError : public Error {
 public:
  using Error::Error;
};

// Numerical breakdown during training (non-finite loss or gradient).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace reclink
