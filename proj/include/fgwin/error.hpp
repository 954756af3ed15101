#pragma once

#include <stdexcept>
#include <string>

namespace fgwin {

/// Broad failure categories. Each maps onto one CLI exit code.
enum class ErrorKind {
  kUsage,
  kParameter,
  kDimension,
  kData,
  kSchema,
  kParse,
  kIo,
  kFormat,
  kNumeric,
  kIntegrity,
  kLabel,
  kCapacity,
  kMetricUndefined,
  kContract,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class KindError : public Error {
 public:
  explicit KindError(const std::string& what) : Error(K, what) {}
};

using UsageError = KindError<ErrorKind::kUsage>;
using ParameterError = KindError<ErrorKind::kParameter>;
using DimensionError = KindError<ErrorKind::kDimension>;
// Empty training sets, all-masked rows, too few sheets, bad fold layouts.
using DataError = KindError<ErrorKind::kData>;
using SchemaError = KindError<ErrorKind::kSchema>;
using ParseError = KindError<ErrorKind::kParse>;
using IoError = KindError<ErrorKind::kIo>;
using FormatError = KindError<ErrorKind::kFormat>;
using NumericError = KindError<ErrorKind::kNumeric>;
using IntegrityError = KindError<ErrorKind::kIntegrity>;
using LabelError = KindError<ErrorKind::kLabel>;
using CapacityError = KindError<ErrorKind::kCapacity>;
using MetricUndefinedError = KindError<ErrorKind::kMetricUndefined>;
using ContractError = KindError<ErrorKind::kContract>;

/// 0 success, 1 usage, 2 data/schema, 3 numeric/integrity.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kParameter:
      return 1;
    case ErrorKind::kData:
    case ErrorKind::kSchema:
    case ErrorKind::kParse:
    case ErrorKind::kIo:
    case ErrorKind::kFormat:
    case ErrorKind::kLabel:
    case ErrorKind::kCapacity:
    case ErrorKind::kMetricUndefined:
      return 2;
    case ErrorKind::kDimension:
    case ErrorKind::kNumeric:
    case ErrorKind::kIntegrity:
    case ErrorKind::kContract:
      return 3;
  }
  return 3;
}

}  // namespace fgwin
