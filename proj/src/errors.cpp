#include "histolens/errors.hpp"

namespace histolens {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound: return "file-not-found";
    case ErrorCode::MalformedStructure: return "malformed-structure";
    case ErrorCode::EmptyCorpus: return "empty-corpus";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::MissingTheme: return "missing-theme";
    case ErrorCode::UnboundPlaceholder: return "unbound-placeholder";
    case ErrorCode::ExemplarCountMismatch: return "exemplar-count-mismatch";
    case ErrorCode::AuthFailure: return "auth-failure";
    case ErrorCode::RateLimitedAfterRetries: return "rate-limited-after-retries";
    case ErrorCode::ProviderError: return "provider-error";
    case ErrorCode::Timeout: return "timeout";
    case ErrorCode::UnknownSchema: return "unknown-schema";
    case ErrorCode::UnparseableAfterRepairs: return "unparseable-after-repairs";
    case ErrorCode::AliasConflict: return "alias-conflict";
    case ErrorCode::EraConflict: return "era-conflict";
    case ErrorCode::DanglingEndpoint: return "dangling-endpoint";
    case ErrorCode::DuplicateNode: return "duplicate-node";
    case ErrorCode::IoFailure: return "io-failure";
    case ErrorCode::EmptyDataset: return "empty-dataset";
    case ErrorCode::InsufficientPerLabel: return "insufficient-per-label";
    case ErrorCode::InsufficientPool: return "insufficient-pool";
    case ErrorCode::LabelOutOfVocabulary: return "label-out-of-vocabulary";
    case ErrorCode::UnknownDataset: return "unknown-dataset";
    case ErrorCode::UnknownSession: return "unknown-session";
    case ErrorCode::SessionComplete: return "session-complete";
    case ErrorCode::OutOfOrderGuess: return "out-of-order-guess";
    case ErrorCode::ConfigInvalid: return "config-invalid";
    case ErrorCode::StageFailure: return "stage-failure";
  }
  return "unknown";
}

}  // namespace histolens
