#pragma once

#include <stdexcept>
#include <string>

namespace loggas {

// Bad user input: malformed config files, unknown keys, out-of-range
// parameters. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A numerical scheme left its validity envelope: CFL violation, Newton
// non-convergence, sampler acceptance collapse, substep-cap exhaustion above
// the configured tolerance. The CLI maps this to exit code 3.
class NumericalInstabilityError : public std::runtime_error {
 public:
  explicit NumericalInstabilityError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace loggas
