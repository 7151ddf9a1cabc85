#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rgdcl {

enum class Errc {
  invalid_config,
  empty_target,
  invalid_token,
  divergence,
  invalid_input,
  invalid_ppl,
  undefined_metric,
  parse_error,
  io_error,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_config: return "invalid-config";
    case Errc::empty_target: return "empty-target";
    case Errc::invalid_token: return "invalid-token";
    case Errc::divergence: return "divergence";
    case Errc::invalid_input: return "invalid-input";
    case Errc::invalid_ppl: return "invalid-ppl";
    case Errc::undefined_metric: return "undefined-metric";
    case Errc::parse_error: return "parse-error";
    case Errc::io_error: return "io-error";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the Errc kinds so
/// callers (and the CLI) can branch on the category without parsing text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace rgdcl
