#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oocqr {

/// Failure reading or writing tile files, manifests, images or reports.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A manifest or tile file on disk does not match what the caller expects.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

/// Invalid configuration key, value or parameter combination.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Zero (or sub-threshold) diagonal entry met during back substitution.
class SingularMatrixError : public std::runtime_error {
 public:
  explicit SingularMatrixError(std::size_t column)
      : std::runtime_error("singular triangular factor: zero diagonal at global column " +
                           std::to_string(column)),
        column_(column) {}

  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

/// I/O failure while executing a task list; carries the failing task's position.
class TaskIoError : public IoError {
 public:
  TaskIoError(std::size_t seq, const std::string& what)
      : IoError("task " + std::to_string(seq) + ": " + what), seq_(seq) {}

  std::size_t seq() const noexcept { return seq_; }

 private:
  std::size_t seq_;
};

}  // namespace oocqr
