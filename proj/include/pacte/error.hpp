#pragma once

#include <stdexcept>
#include <string>

namespace pacte {

// Base of every error raised by the library. Callers that only need a message
// can catch std::runtime_error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (files, corpora, annotations).
class DataError : public Error {
 public:
  using Error::Error;
};

// Numerical failure (non-finite values, non-convergence, undefined cosine).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace pacte
