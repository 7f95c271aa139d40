#pragma once

#include <stdexcept>
#include <string>

namespace gfmate {

enum class ErrorKind {
  parse,
  index,
  shape,
  invalid_argument,
  insufficient_shots,
  invalid_grouping,
  empty_input,
  missing_class,
  no_signal,
  corrupt_checkpoint,
  unsupported_version,
  stale_cache,
  io,
  config,
  numeric,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// CLI exit status for an error: 2 config, 3 data, 4 numeric failure.
int exit_code_for(ErrorKind kind) noexcept;

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace gfmate
