#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace anfis {

enum class ErrorCode {
  MissingFile,
  MissingColumn,
  UnparseableRow,
  DuplicateDate,
  InvalidSeries,
  EmptyIntersection,
  LengthMismatch,
  TooShort,
  DegenerateSplit,
  DimensionMismatch,
  ZeroFiring,
  InvalidModel,
  DegenerateRange,
  RuleExplosion,
  EmptyData,
  TooManyClusters,
  SingularSystem,
  SingularNormalMatrix,
  CyclicWiring,
  UnknownSignal,
  InsufficientTestSpan,
  EmptyRecord,
  ZeroDenominator,
  InvalidArgument,
  ParseError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::UnparseableRow: return "UnparseableRow";
    case ErrorCode::DuplicateDate: return "DuplicateDate";
    case ErrorCode::InvalidSeries: return "InvalidSeries";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::DegenerateSplit: return "DegenerateSplit";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroFiring: return "ZeroFiring";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::RuleExplosion: return "RuleExplosion";
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::TooManyClusters: return "TooManyClusters";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::SingularNormalMatrix: return "SingularNormalMatrix";
    case ErrorCode::CyclicWiring: return "CyclicWiring";
    case ErrorCode::UnknownSignal: return "UnknownSignal";
    case ErrorCode::InsufficientTestSpan: return "InsufficientTestSpan";
    case ErrorCode::EmptyRecord: return "EmptyRecord";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library. `index()` carries the offending
/// line number, row, or element position when one applies.
class Error : public std::runtime_error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  Error(ErrorCode code, const std::string& message, std::size_t index = npos)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        index_(index) {}

  ErrorCode code() const noexcept { return code_; }
  std::size_t index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::size_t index_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message,
                              std::size_t index = Error::npos) {
  throw Error(code, message, index);
}

}  // namespace anfis
