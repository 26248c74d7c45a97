#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xatk {

// Base class for every error the library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operands or file payloads whose dimensions do not line up.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid configuration value (bad alpha, zero IG steps, unknown method...).
struct ConfigError : Error {
  using Error::Error;
};

// Problems with dataset / pool contents (empty class pool, bad labels...).
struct DataError : Error {
  using Error::Error;
};

// Structured file-format failures. `kind` distinguishes the cases the
// binary containers must tell apart; `offset` is the byte position for
// truncation errors.
struct FormatError : Error {
  enum class Kind { BadMagic, BadVersion, Truncated, BadValue, Io };

  FormatError(Kind k, const std::string& msg, std::size_t off = 0)
      : Error(msg), kind(k), offset(off) {}

  Kind kind;
  std::size_t offset;
};

}  // namespace xatk
