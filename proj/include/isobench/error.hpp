#pragma once

#include <stdexcept>
#include <string>

namespace isobench {

/// Every failure raised by the library carries one of these codes so callers
/// (the CLI in particular) can map them onto exit statuses without string
/// matching.
enum class ErrorCode {
  // corpus / parsing
  MalformedStanza,
  MissingHeader,
  UnterminatedTheory,
  UnterminatedProof,
  SelfImport,
  UnresolvedImport,
  UnresolvedSession,
  DuplicateSession,
  DependencyCycle,
  UnknownTheory,
  // isolation
  LemmaExcluded,
  TheoryNotInGraph,
  MissingPlaceholder,
  SpliceCollision,
  // prover
  ExecutableNotFound,
  // retrieval
  EmptyQuery,
  NoCandidate,
  // endpoint
  AuthError,
  TransportError,
  ResponseMalformed,
  // configuration / io
  ConfigError,
  IoError,
};

const char* to_string(ErrorCode code) noexcept;
/// Inverse of to_string; unknown names map to IoError.
ErrorCode parse_error_code(const std::string& name) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace isobench
