#pragma once

// Shared error machinery. Every failure surfaced to callers carries a
// category so the command-line layer can print one machine-parseable line.

#include <cstdarg>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace tkgr {

enum class ErrorKind {
  parse,      // malformed input data
  vocab,      // unknown entity/relation name under a frozen vocabulary
  config,     // invalid configuration value or key
  io,         // file system failure
  contract,   // violated precondition / invariant
  integrity,  // corrupt serialized artifact
  argument,   // bad command-line usage
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::parse: return "parse_error";
    case ErrorKind::vocab: return "vocab_error";
    case ErrorKind::config: return "config_error";
    case ErrorKind::io: return "io_error";
    case ErrorKind::contract: return "contract_error";
    case ErrorKind::integrity: return "integrity_error";
    case ErrorKind::argument: return "argument_error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

// printf-style formatting into std::string (no std::format on this toolchain).
inline std::string strf(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  va_list copy;
  va_copy(copy, args);
  int n = std::vsnprintf(nullptr, 0, fmt, copy);
  va_end(copy);
  std::string out(n > 0 ? static_cast<size_t>(n) : 0, '\0');
  if (n > 0) std::vsnprintf(out.data(), out.size() + 1, fmt, args);
  va_end(args);
  return out;
}

}  // namespace tkgr
