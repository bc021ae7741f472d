#pragma once

#include <stdexcept>
#include <string>

namespace omcs {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Allocation and instance lengths disagree.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

// A domain value violates a documented invariant (bad agent, bad params, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

// A fairness requirement cannot be met on the given instance or budget.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// A numeric routine failed to converge or hit an inconsistent state.
class SolverError : public Error {
 public:
  using Error::Error;
};

// Malformed input file, config, or CSV.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace omcs
