#pragma once

#include <stdexcept>

namespace embkit {

// Every exception thrown by the library derives from Error. The CLI maps
// any Error to a one-line diagnostic and a nonzero exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ArgumentError : Error { using Error::Error; };    // bad call arguments
struct ConfigError : Error { using Error::Error; };      // invalid configuration
struct ParseError : Error { using Error::Error; };       // malformed text input
struct ValidationError : Error { using Error::Error; };  // data violates an invariant
struct FormatError : Error { using Error::Error; };      // malformed binary input
struct NumericError : Error { using Error::Error; };     // non-finite or degenerate numerics
struct ContractError : Error { using Error::Error; };    // API misuse (stale cache, bad state)

}  // namespace embkit
