#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace imitatio {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Kernel spec failed structural validation. Maps to exit code 2 in the CLI.
struct KernelValidationError : Error {
  explicit KernelValidationError(std::vector<std::string> violations_)
      : Error(join(violations_)), violations(std::move(violations_)) {}
  std::vector<std::string> violations;

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "kernel spec invalid:";
    for (const auto& m : v) {
      s += "\n  - ";
      s += m;
    }
    return s;
  }
};

/// An operation was called on a kernel that does not satisfy its
/// preconditions (wrong verdict, missing threshold, ...). Exit code 3.
struct PreconditionError : Error {
  using Error::Error;
};

/// Bad command line. Exit code 3.
struct UsageError : Error {
  using Error::Error;
};

/// A walk or sampler exceeded its step budget.
struct StepCapExceeded : Error {
  using Error::Error;
};

}  // namespace imitatio
