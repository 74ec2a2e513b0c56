#pragma once

#include <stdexcept>
#include <string>

namespace erm_lab {

// Bad arguments, malformed documents, violated preconditions.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// Factorization failures, exhausted rejection budgets.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace erm_lab
