#include "kinedeep/error.h"

namespace kinedeep {

void throwValidation(const std::string& message) {
  throw ValidationError(message);
}

void throwNumerical(const std::string& message) {
  throw NumericalError(message);
}

}  // namespace kinedeep
