#pragma once

#include <stdexcept>
#include <string>

namespace specbnp {

// Bad shapes, malformed files, invalid parameters. The CLI maps these to exit 2.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// A contraction or product whose operand shapes disagree on one mode.
class DimensionError : public InputError {
 public:
  DimensionError(const std::string& what, int mode)
      : InputError(what + " (mode " + std::to_string(mode) + ")"), mode_(mode) {}
  int mode() const { return mode_; }

 private:
  int mode_;
};

// Rank deficiency, failed whitening, out-of-branch eigenvalues. CLI exit 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace specbnp
