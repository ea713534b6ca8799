#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace logora {

enum class ErrorCode {
  kShapeMismatch,
  kNotScalar,
  kBadConfig,
  kEmpty,
  kTooLarge,
  kLabelOutOfRange,
  kOutOfRange,
  kClassMismatch,
  kNoPrototypes,
  kEmptyDataset,
  kMissingLabels,
  kFormatError,
  kMetaMismatch,
  kIoError,
};

std::string_view error_code_name(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto a stable exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace logora

/// Throws logora::Error when `cond` is false; `message` is only built on failure.
#define LOGORA_CHECK(cond, code, message)  \
  do {                                     \
    if (!(cond)) ::logora::fail(code, message); \
  } while (false)

namespace logora {

}  // namespace logora
