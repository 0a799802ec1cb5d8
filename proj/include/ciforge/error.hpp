#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ciforge {

enum class ErrorCode {
  // statute_graph
  EmptyDocument,
  DuplicateId,
  MalformedId,
  MalformedDocument,
  // model_gateway
  GatewayError,
  AuthMissing,
  RateLimited,
  ReplayMiss,
  MalformedRemoteResponse,
  CassetteCorrupt,
  // case_forge / corpus
  UnparseableResponse,
  EmptyCandidatePool,
  NetworkError,
  SnapshotMissing,
  InsufficientNegatives,
  // evalkit
  MissingNorm,
  LengthMismatch,
  TaskMismatch,
  // plumbing
  InvalidInput,
  Config,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every failure the library raises carries a code so callers (the CLI in
// particular) can map it to an exit status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ciforge
