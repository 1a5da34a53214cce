#pragma once

#include <stdexcept>
#include <string>

namespace iqrl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class CorruptFileError : public Error {
 public:
  using Error::Error;
};

class VersionMismatchError : public Error {
 public:
  using Error::Error;
};

class ConfigMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace iqrl
