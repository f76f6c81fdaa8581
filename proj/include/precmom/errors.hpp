#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace precmom {

// Operands whose dimensions do not agree.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Diagonal matrix with a non-positive entry where positivity is required.
struct InvalidPreconditionerError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Preconditioner state that violates its own invariants (e.g. negative
// running diagonal under a square-root rule).
struct StateCorruptionError : std::logic_error {
  using std::logic_error::logic_error;
};

// Non-finite value encountered while iterating; carries the iteration index.
struct DivergenceError : std::runtime_error {
  DivergenceError(long iter, const std::string& what)
      : std::runtime_error(what + " at iteration " + std::to_string(iter)),
        iteration(iter) {}
  long iteration;
};

// Objective without a positive strong-convexity modulus.
struct NoStrongConvexityError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Reference solve did not certify an optimum within budget.
struct ReferenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Step-dependent schedule queried at an index where it is undefined.
struct ScheduleError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed input text; carries the 1-based line number.
struct ParseError : std::runtime_error {
  ParseError(std::size_t line_no, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + what),
        line(line_no) {}
  std::size_t line;
};

struct EmptyDatasetError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Constants outside their admissible ranges (e.g. mu > L, e > Gamma).
struct InvalidConstantsError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Averaging weights whose ratio leaves (0, 1).
struct InvalidWeightsError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A check invoked on a run that violates the check's side conditions.
struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Every candidate in a tuning sweep diverged.
struct TuningError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace precmom
