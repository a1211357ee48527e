#pragma once

#include <stdexcept>
#include <string>

namespace sbrl {

// Shape or dimension disagreement between operands.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf where a finite value is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API misuse: empty sample set, backward before forward, bad argument.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Malformed persisted data; carries the byte offset where parsing stopped.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t at)
      : std::runtime_error(what + " (byte offset " + std::to_string(at) + ")"),
        offset(at) {}
  std::size_t offset;
};

// Invalid or unknown configuration input.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sbrl
