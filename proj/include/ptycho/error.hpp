#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ptycho {

enum class ErrorKind {
  InvalidArgument,
  NonFinite,
  OutOfBounds,
  ZeroEnergy,
  ShapeMismatch,
  Unsupported,
  Divergence,
  // Container format errors.
  BadMagic,
  Truncated,
  ManifestMismatch,
  UnknownVersion,
  BadHeader,
  Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when a field contains NaN or Inf; carries the flat index of the first bad element.
class NonFiniteError : public Error {
 public:
  NonFiniteError(std::size_t index, const std::string& where);
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Raised by the solvers when the loss stops being finite.
class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, const std::string& solver);
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// True for the error kinds that describe malformed input files or datasets.
bool is_data_error(ErrorKind kind);

}  // namespace ptycho
