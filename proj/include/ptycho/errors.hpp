#pragma once
#include <stdexcept>
#include <string>

namespace ptycho {

// Exit-code taxonomy used by the CLI: 2 usage, 3 numeric, 4 I/O.
// invalid-argument -> std::invalid_argument, index-error -> std::out_of_range.

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StateError : std::runtime_error {
  explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace ptycho
