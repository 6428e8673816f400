#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qkm {

// Argument errors use std::invalid_argument, index errors std::out_of_range.

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row)
      : std::runtime_error(what), row_(row) {}

  /// 1-based row of the offending record (0 when not row-specific).
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class EmptyDatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A distribution or estimator has no mass / no valid samples.
class DegenerateError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Operation invoked on an object in the wrong state (e.g. query on an empty index).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace qkm
