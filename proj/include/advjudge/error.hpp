#pragma once

#include <stdexcept>
#include <string>

namespace advjudge {

// Error categories map onto CLI exit codes (see tools/advjudge.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace advjudge
