#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace histolens {

enum class ErrorCode {
  FileNotFound,
  MalformedStructure,
  EmptyCorpus,
  InvalidArgument,
  MissingTheme,
  UnboundPlaceholder,
  ExemplarCountMismatch,
  AuthFailure,
  RateLimitedAfterRetries,
  ProviderError,
  Timeout,
  UnknownSchema,
  UnparseableAfterRepairs,
  AliasConflict,
  EraConflict,
  DanglingEndpoint,
  DuplicateNode,
  IoFailure,
  EmptyDataset,
  InsufficientPerLabel,
  InsufficientPool,
  LabelOutOfVocabulary,
  UnknownDataset,
  UnknownSession,
  SessionComplete,
  OutOfOrderGuess,
  ConfigInvalid,
  StageFailure,
};

/// Stable kebab-case name used in logs, HTTP payloads and error reports.
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed input with a position (1-based line, 0 when unknown).
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& message)
      : Error(ErrorCode::MalformedStructure,
              source + ":" + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace histolens
