#pragma once

#include <stdexcept>
#include <string>

namespace kinedeep {

/// Malformed input: bad config, bad file contents, mismatched dimensions.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] void throwValidation(const std::string& message);
[[noreturn]] void throwNumerical(const std::string& message);

}  // namespace kinedeep
