#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ldm {

enum class ErrorCode {
  InvalidElement,
  UnknownElement,
  AttributeOverlap,
  TimestampRegression,
  OutOfLocalRange,
  MalformedDocument,
  SyntaxError,
  SchemaError,
  InvalidMessage,
  InvalidConfig,
  NoPose,
  NoMap,
  Unmatched,
  UnknownNode,
  SinkError,
  BindError,
  FileError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for every domain failure; `code()` selects the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  [[nodiscard]] const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace ldm
