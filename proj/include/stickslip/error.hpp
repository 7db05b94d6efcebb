#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stickslip {

enum class ErrorKind {
  config,        // invariant violated by a configuration
  parameter,     // bad argument to an operation
  input_format,  // unreadable or malformed file / message
  empty_input,
  sample_size,
  degenerate,
  divergence,    // NaN or infinity in the integrated state
  runaway,       // OFC relaxation exceeded its sweep cap
  reference,     // dangling id
  version,
  integrity,
  protocol,
  unsupported,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Error raised while decoding a byte stream; carries the offending offset.
class FormatError : public Error {
 public:
  FormatError(ErrorKind kind, std::size_t offset, const std::string &what)
      : Error(kind, what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Error raised by the integrator when a block's state is no longer finite.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t block, const std::string &what)
      : Error(ErrorKind::divergence, what + " (block " + std::to_string(block) + ")"), block_(block) {}
  std::size_t block() const noexcept { return block_; }

 private:
  std::size_t block_;
};

/// Process exit code used by the command-line tool for each error kind.
int exit_code(ErrorKind kind) noexcept;

}  // namespace stickslip
