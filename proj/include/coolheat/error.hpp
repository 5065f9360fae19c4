#pragma once

#include <stdexcept>
#include <string>

namespace coolheat {

// Bad input: malformed config, violated precondition, unknown label.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mathematically undefined argument (e.g. a non-integer m - j).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A numerical procedure could not meet its accuracy contract.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace coolheat
