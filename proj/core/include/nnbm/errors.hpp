#pragma once

#include <stdexcept>
#include <string>

namespace nnbm {

// Exit-code classes shared by the library and the CLI.
// 0 success, 2 usage, 3 convergence, 4 stability, 5 data/domain, 6 unsupported size.
enum class ErrorClass : int {
  Convergence = 3,
  Stability = 4,
  Domain = 5,
  UnsupportedSize = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }
  int exit_code() const noexcept { return static_cast<int>(cls_); }

 private:
  ErrorClass cls_;
};

/// Invalid argument, malformed input, or degenerate data.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorClass::Domain, what) {}
};

/// An iterative solver exhausted max_iter; carries the last residual.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(ErrorClass::Convergence, what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

/// A positivity guard could not be satisfied even after damping retries.
class StabilityError : public Error {
 public:
  explicit StabilityError(const std::string& what) : Error(ErrorClass::Stability, what) {}
};

/// Request outside the supported problem size (e.g. deterministic quadrature for n > 3).
class UnsupportedSizeError : public Error {
 public:
  explicit UnsupportedSizeError(const std::string& what)
      : Error(ErrorClass::UnsupportedSize, what) {}
};

}  // namespace nnbm
