#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agentprm {

enum class ErrorKind {
  Config,
  IllegalAction,
  Protocol,
  OracleUnavailable,
  Data,
  Divergence,
  Aggregation,
  Internal,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; the kind is what callers branch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace agentprm
