#pragma once

#include <stdexcept>
#include <string>

namespace occnn {

// Error categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  shape,        // dimension mismatch between operands
  parameter,    // invalid hyperparameter or configuration value
  input,        // invalid data (non-finite values, bad labels, empty sets)
  numerical,    // factorization failure
  convergence,  // iterative solver hit its cap
  divergence,   // training produced a non-finite loss
  protocol,     // split construction impossible with the given data
  parse,        // malformed file contents
  format,       // structurally inconsistent file (ragged rows, mixed dims)
  corrupt,      // bad magic / unsupported version / truncated artifact
  usage,        // API misuse (stale cache, mismatched state)
  io,           // filesystem failure
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

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace occnn
