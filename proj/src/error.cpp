#include "gfmate/error.hpp"

namespace gfmate {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::parse: return "parse error";
    case ErrorKind::index: return "index error";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::insufficient_shots: return "insufficient shots";
    case ErrorKind::invalid_grouping: return "invalid grouping";
    case ErrorKind::empty_input: return "empty input";
    case ErrorKind::missing_class: return "missing class";
    case ErrorKind::no_signal: return "no training signal";
    case ErrorKind::corrupt_checkpoint: return "corrupt checkpoint";
    case ErrorKind::unsupported_version: return "unsupported version";
    case ErrorKind::stale_cache: return "stale cache";
    case ErrorKind::io: return "io error";
    case ErrorKind::config: return "config error";
    case ErrorKind::numeric: return "numeric failure";
  }
  return "error";
}

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::invalid_argument:
    case ErrorKind::invalid_grouping:
    case ErrorKind::stale_cache:
      return 2;
    case ErrorKind::numeric:
      return 4;
    default:
      return 3;
  }
}

}  // namespace gfmate
