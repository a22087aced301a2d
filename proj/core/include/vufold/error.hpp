#pragma once

#include <stdexcept>
#include <string>

namespace vufold {

// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or configuration, detected before any computation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable GVOL data.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Non-finite state produced by time integration.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int iteration, int vertex)
      : Error(what), iteration_(iteration), vertex_(vertex) {}

  int iteration() const noexcept { return iteration_; }
  int vertex() const noexcept { return vertex_; }

 private:
  int iteration_;
  int vertex_;
};

}  // namespace vufold
