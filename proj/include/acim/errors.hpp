#pragma once

#include <stdexcept>
#include <string>

namespace acim {

// Bad user input: malformed spec files, parameter domain violations.
struct input_error : std::runtime_error {
  explicit input_error(const std::string& m) : std::runtime_error(m) {}
};

// A documented precondition of an operation does not hold.
struct precondition_error : std::runtime_error {
  explicit precondition_error(const std::string& m) : std::runtime_error(m) {}
};

// Component caps, iteration budgets, truncation depth exhausted.
struct resource_error : std::runtime_error {
  explicit resource_error(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace acim
