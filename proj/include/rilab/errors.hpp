#pragma once

#include <stdexcept>
#include <string>

namespace rilab {

// Invalid argument or precondition violation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Numerical failure (ill-conditioned solve, quadrature not converging).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Memory or work budget exceeded before starting.
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

}  // namespace rilab
