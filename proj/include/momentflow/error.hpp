#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mf {

enum class ErrorCode {
  KindMismatch,
  DomainError,
  ZeroNormalizer,
  MaxOrderExceeded,
  LadderMismatch,
  LadderTooShort,
  OrderNotInLadder,
  EmptyBatch,
  BadLadderSpec,
  BadKindSpec,
  BadProviderSpec,
  BadBatchFile,
  BadStateDocument,
  DigestMismatch,
  LockError,
  TimingUnstable,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-readable code; the CLI maps codes to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mf
