#pragma once

#include <stdexcept>
#include <string>

namespace sef {

// Base of every error thrown by the library. The CLI maps subclasses onto
// exit codes: ConfigError/ShapeError/DataError/DomainError -> 2,
// TrainingError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace sef
