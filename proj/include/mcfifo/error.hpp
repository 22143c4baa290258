#pragma once

#include <stdexcept>
#include <string>

namespace mcfifo {

enum class ErrorKind {
  invalid_spec,
  unsupported_envelope,
  no_decay,
  condition_not_met,
  no_positive_root,
  invalid_input,
  unknown_case,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_spec: return "invalid-spec";
    case ErrorKind::unsupported_envelope: return "unsupported-envelope";
    case ErrorKind::no_decay: return "no-decay";
    case ErrorKind::condition_not_met: return "condition-not-met";
    case ErrorKind::no_positive_root: return "no-positive-root";
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::unknown_case: return "unknown-case";
  }
  return "unknown";
}

// Every failure raised by the library carries one of the kinds above.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mcfifo
