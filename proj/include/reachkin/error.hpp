#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace reachkin {

enum class ErrorKind {
  InvalidRotation,
  Domain,
  Ordering,
  Data,
  Io,
};

/// Base of every exception thrown by the toolkit. The kind drives the CLI
/// exit code (data errors exit 2, I/O errors exit 3).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidRotationError : public Error {
 public:
  explicit InvalidRotationError(const std::string& what)
      : Error(ErrorKind::InvalidRotation, what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

/// Raised when a time-ordered input is not. `index` names the offending sample.
class OrderingError : public Error {
 public:
  OrderingError(const std::string& what, std::size_t index)
      : Error(ErrorKind::Ordering, what + " (index " + std::to_string(index) + ")"),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace reachkin
