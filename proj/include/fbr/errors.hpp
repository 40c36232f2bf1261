#pragma once

#include <stdexcept>
#include <string>

namespace fbr {

// Input file could not be parsed. Carries a 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what, int line = 0)
      : std::runtime_error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Domain invariant violated (bad report, unknown node, bad parameter).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Solver stopped before reaching the requested tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual_norm)
      : std::runtime_error(what + " (residual norm " + std::to_string(residual_norm) + ")"),
        residual_norm_(residual_norm) {}
  double residual_norm() const { return residual_norm_; }

 private:
  double residual_norm_;
};

// Command-line misuse (conflicting flags, missing arguments).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failure (missing file, unwritable output directory).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fbr
