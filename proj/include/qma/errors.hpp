#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qma {

/// One row of a solver iteration trace. Also the CSV row layout.
struct TraceRow {
  double t = 0.0;
  int iteration = 0;
  double residual_sup = 0.0;
  double cone_margin = 0.0;
  double b = 0.0;
  double damping = 1.0;
  int krylov_iterations = 0;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a structural precondition (antisymmetry, ranges, shapes).
class MalformedInput : public Error {
 public:
  using Error::Error;
};

/// A form that must be strictly positive is not. Carries the offending grid
/// point (0 for pointwise calls) and its positivity margin.
class ConeError : public Error {
 public:
  ConeError(const std::string& what, std::size_t point, double margin)
      : Error(what), point_(point), margin_(margin) {}
  std::size_t point() const noexcept { return point_; }
  double margin() const noexcept { return margin_; }

 private:
  std::size_t point_;
  double margin_;
};

class JRealityError : public Error {
 public:
  JRealityError(const std::string& what, double defect) : Error(what), defect_(defect) {}
  double defect() const noexcept { return defect_; }

 private:
  double defect_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  enum class Kind { StepFailure, LinearSolve, Divergence, ContinuationFailure };

  SolverError(Kind kind, const std::string& what, std::vector<TraceRow> trace = {})
      : Error(what), kind_(kind), trace_(std::move(trace)) {}

  Kind kind() const noexcept { return kind_; }
  const std::vector<TraceRow>& trace() const noexcept { return trace_; }
  void set_trace(std::vector<TraceRow> trace) { trace_ = std::move(trace); }

 private:
  Kind kind_;
  std::vector<TraceRow> trace_;
};

inline const char* to_string(SolverError::Kind kind) {
  switch (kind) {
    case SolverError::Kind::StepFailure: return "step_failure";
    case SolverError::Kind::LinearSolve: return "linear_solve";
    case SolverError::Kind::Divergence: return "divergence";
    case SolverError::Kind::ContinuationFailure: return "continuation_failure";
  }
  return "unknown";
}

}  // namespace qma
