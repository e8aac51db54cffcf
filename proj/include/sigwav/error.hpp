#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sigwav {

enum class ErrorCategory {
  dimension,
  input_too_short,
  domain,
  contract,
  config,
  dataset,
  label,
  format,
  parse,
  numerical,
  empty_sequence,
};

std::string_view category_name(ErrorCategory c) noexcept;

// Process exit code used by the CLI for a given category.
int exit_code(ErrorCategory c) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& what) { throw Error(c, what); }

inline void require(bool cond, ErrorCategory c, const std::string& what) {
  if (!cond) fail(c, what);
}

}  // namespace sigwav
