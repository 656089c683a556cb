#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emofuse {

enum class ErrorKind {
  io,         // missing or unreadable file
  format,     // malformed input row, header, or blob
  data,       // well-formed input with invalid content (unknown label, empty set)
  dimension,  // shape mismatch between components
  config,     // invalid or incomplete configuration
  numeric,    // non-finite loss or value
  usage,      // bad command-line usage
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception. `kind()` is stable and machine-readable; the
/// message is a single line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Emits a one-line warning on stderr ("warning: ...").
void warn(std::string_view message);

}  // namespace emofuse
