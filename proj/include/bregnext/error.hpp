#pragma once

#include <stdexcept>
#include <string>

namespace bnx {

/// Broad failure classes. The CLI maps these onto its exit-code contract.
enum class ErrorKind {
  Usage,     // bad arguments, unknown names, invalid configs
  Data,      // unreadable or malformed input files
  Numeric,   // non-finite values, degenerate statistics
  State,     // operation called in the wrong order
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Shape disagreement between a node and its inputs (or a feed and its placeholder).
class ShapeError : public Error {
 public:
  ShapeError(std::string node, const std::string& what)
      : Error(ErrorKind::Usage, "shape mismatch at '" + node + "': " + what), node_(std::move(node)) {}
  const std::string& node() const noexcept { return node_; }

 private:
  std::string node_;
};

/// A value that must be finite was not.
class NonFiniteError : public Error {
 public:
  NonFiniteError(std::string node, const std::string& what)
      : Error(ErrorKind::Numeric, "non-finite value at '" + node + "': " + what), node_(std::move(node)) {}
  const std::string& node() const noexcept { return node_; }

 private:
  std::string node_;
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& what) : Error(ErrorKind::State, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

/// Zero-variance input to a correlation metric.
class DegenerateSeriesError : public Error {
 public:
  explicit DegenerateSeriesError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

/// Malformed dataset row; carries the 1-based line number in the source file.
class RowError : public DataError {
 public:
  RowError(std::size_t row, const std::string& what)
      : DataError("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class CheckpointVersionError : public DataError {
 public:
  using DataError::DataError;
};

class CheckpointTruncatedError : public DataError {
 public:
  using DataError::DataError;
};

/// Checkpoint contents do not fit the requested model (config, names or shapes).
class CheckpointMismatchError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace bnx
