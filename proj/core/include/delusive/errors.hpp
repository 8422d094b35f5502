#pragma once

#include <stdexcept>
#include <string>

namespace delusive {

// Bad experiment configuration, bad CLI usage, or contract violations the
// caller could have checked. CLI exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// An attacked dataset failed the threat-ball legality gate. CLI exit code 3.
struct LegalityError : std::runtime_error {
  explicit LegalityError(const std::string& what) : std::runtime_error(what) {}
};

// File-level failures. `code` distinguishes plain I/O trouble from a
// recognizably broken file. CLI exit code 4.
struct IoError : std::runtime_error {
  enum class Code { OpenOrRead, MalformedHeader, DimensionMismatch };
  IoError(Code c, const std::string& what) : std::runtime_error(what), code(c) {}
  Code code;
};

}  // namespace delusive
