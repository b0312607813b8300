#pragma once

#include <stdexcept>
#include <string>

namespace zlse {

// Error categories map one-to-one onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 1; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class GeometryError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 3; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 4; }
};

// Non-fatal diagnostics go to stderr unless silenced (tests silence them).
void warn(const std::string& message);
void set_warnings_enabled(bool enabled);

}  // namespace zlse
