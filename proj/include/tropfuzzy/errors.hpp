#pragma once

#include <stdexcept>
#include <string>

namespace tropfuzzy {

// Bad user-supplied input: files, schemas, rule specs, CLI values.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated an API precondition (shape mismatch and the like).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Argument outside the mathematical domain of an operator.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace tropfuzzy
