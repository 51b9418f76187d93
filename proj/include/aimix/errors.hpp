#pragma once

#include <stdexcept>
#include <string>

namespace aimix {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : Error {
  using Error::Error;
};
struct NonConvergence : Error {
  using Error::Error;
};
struct NumericFailure : Error {
  using Error::Error;
};
struct EmptyWindow : Error {
  using Error::Error;
};
struct DegenerateWindow : Error {
  using Error::Error;
};
struct SingularInformation : Error {
  using Error::Error;
};
struct MissingEstimate : Error {
  using Error::Error;
};
struct DegenerateWeights : Error {
  using Error::Error;
};
struct NestingViolation : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct MissingField : ParseError {
  using ParseError::ParseError;
};
struct AnnotationConflict : Error {
  using Error::Error;
};
struct EmptyDataset : Error {
  using Error::Error;
};
struct VersionMismatch : Error {
  using Error::Error;
};
struct CorruptStore : Error {
  using Error::Error;
};
struct HashMismatch : Error {
  using Error::Error;
};
struct UsageError : Error {
  using Error::Error;
};

} // namespace aimix
