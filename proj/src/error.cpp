#include "momentflow/error.hpp"

namespace mf {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::ZeroNormalizer: return "ZeroNormalizer";
    case ErrorCode::MaxOrderExceeded: return "MaxOrderExceeded";
    case ErrorCode::LadderMismatch: return "LadderMismatch";
    case ErrorCode::LadderTooShort: return "LadderTooShort";
    case ErrorCode::OrderNotInLadder: return "OrderNotInLadder";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::BadLadderSpec: return "BadLadderSpec";
    case ErrorCode::BadKindSpec: return "BadKindSpec";
    case ErrorCode::BadProviderSpec: return "BadProviderSpec";
    case ErrorCode::BadBatchFile: return "BadBatchFile";
    case ErrorCode::BadStateDocument: return "BadStateDocument";
    case ErrorCode::DigestMismatch: return "DigestMismatch";
    case ErrorCode::LockError: return "LockError";
    case ErrorCode::TimingUnstable: return "TimingUnstable";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace mf
