#ifndef MVBOW_ERROR_HPP
#define MVBOW_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mvbow {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller passed an invalid argument (bad beta, dimension mismatch, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A file does not carry the expected magic/version.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A file carries the right header but a truncated or oversized payload.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

// Input data violates a documented invariant (non-finite values,
// out-of-range word ids, empty positive sets, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Problem in a pipeline configuration file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mvbow

#endif  // MVBOW_ERROR_HPP
