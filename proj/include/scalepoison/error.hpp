#pragma once

#include <stdexcept>
#include <string>

namespace scalepoison {

enum class Errc {
  invalid_argument,
  dimension_mismatch,
  unreadable_file,
  unsupported_format,
  corrupt_stream,
  io_failure,
  not_normalized,
  insufficient_items,
};

inline const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::unreadable_file: return "unreadable file";
    case Errc::unsupported_format: return "unsupported format";
    case Errc::corrupt_stream: return "corrupt stream";
    case Errc::io_failure: return "I/O failure";
    case Errc::not_normalized: return "weights not normalized";
    case Errc::insufficient_items: return "insufficient items";
  }
  return "unknown error";
}

/// Every failure raised by the library carries one of the codes above so
/// callers can branch on the cause without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace scalepoison
