#pragma once

#include <stdexcept>
#include <string>

namespace gqr {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  InvalidTau,
  InvalidData,
  EmptyInteresting,
  RankDeficientNuisance,
  RankDeficientDesign,
  DidNotConverge,
  WnNeedsCategorical,
  IndexZeroReserved,
  InvalidParameters,
};

// Coarse classification used by the command line front end for exit codes.
enum class ErrorClass { Usage, Data, Numerical };

inline ErrorClass classify(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::RankDeficientDesign:
    case ErrorKind::DidNotConverge:
      return ErrorClass::Numerical;
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidTau:
    case ErrorKind::IndexZeroReserved:
    case ErrorKind::InvalidParameters:
      return ErrorClass::Usage;
    default:
      return ErrorClass::Data;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace gqr
