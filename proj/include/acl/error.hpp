#ifndef ACL_ERROR_HPP
#define ACL_ERROR_HPP

#include <cstdio>
#include <stdexcept>
#include <string>

namespace acl {

// Shape mismatch between composed layers or between a network and its input.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed argument (empty input, invalid range, bad distribution, ...).
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int epoch, int batch)
      : std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch)),
        epoch(epoch),
        batch(batch) {}
  int epoch;
  int batch;
};

// Input outside an operation's domain (e.g. zero-mass image for EMD).
class DegenerateInputError : public std::runtime_error {
 public:
  explicit DegenerateInputError(const std::string& what) : std::runtime_error(what) {}
};

// Operation called in a state it does not support (e.g. verdict before calibration).
class StateError : public std::logic_error {
 public:
  explicit StateError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace acl

#endif  // ACL_ERROR_HPP
