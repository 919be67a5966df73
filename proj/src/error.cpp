#include "ptycho/error.hpp"

#include <fmt/format.h>

namespace ptycho {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::NonFinite: return "non-finite value";
    case ErrorKind::OutOfBounds: return "out of bounds";
    case ErrorKind::ZeroEnergy: return "zero energy";
    case ErrorKind::ShapeMismatch: return "shape mismatch";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::BadMagic: return "bad magic";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::ManifestMismatch: return "manifest mismatch";
    case ErrorKind::UnknownVersion: return "unknown format version";
    case ErrorKind::BadHeader: return "bad header";
    case ErrorKind::Io: return "i/o failure";
  }
  return "unknown";
}

NonFiniteError::NonFiniteError(std::size_t index, const std::string& where)
    : Error(ErrorKind::NonFinite,
            fmt::format("{}: non-finite value at flat index {}", where, index)),
      index_(index) {}

DivergenceError::DivergenceError(int epoch, const std::string& solver)
    : Error(ErrorKind::Divergence,
            fmt::format("{}: loss became non-finite at epoch {}", solver, epoch)),
      epoch_(epoch) {}

bool is_data_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BadMagic:
    case ErrorKind::Truncated:
    case ErrorKind::ManifestMismatch:
    case ErrorKind::UnknownVersion:
    case ErrorKind::BadHeader:
    case ErrorKind::Io:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::OutOfBounds:
    case ErrorKind::NonFinite:
    case ErrorKind::Unsupported:
    case ErrorKind::InvalidArgument:
    case ErrorKind::ZeroEnergy:
      return true;
    case ErrorKind::Divergence:
      return false;
  }
  return true;
}

}  // namespace ptycho
