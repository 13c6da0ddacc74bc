#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace rankstat {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorKind {
  InvalidMatrix,
  InvalidInput,
  DomainError,
  OutOfDomain,
  UnsupportedPhi,
  NotOnGraph,
  NotTangentDirection,
  NotAdmissibleDirection,
  NotFeasible,
  InnerSolveFailure,
  EmptySchedule,
  ParseError,
};

const char* to_string(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

enum class Verdict { Verified, Refuted, Unknown };

const char* to_string(Verdict v);

// Largest absolute entry, or 0 for an empty matrix.
inline double max_abs(const Matrix& A) {
  return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff();
}

// Spectral (operator 2-) norm.
double spectral_norm(const Matrix& A);

double nuclear_norm(const Matrix& A);

bool all_finite(const Matrix& A);

}  // namespace rankstat
