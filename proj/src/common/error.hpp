#pragma once

#include <stdexcept>
#include <string>

namespace eidc {

// Error categories map one-to-one onto the C API status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration, shape mismatch, malformed checkpoint or manifest.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// API misuse, e.g. replaying a consumed gradient tape.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where the math requires finite ones.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace eidc
