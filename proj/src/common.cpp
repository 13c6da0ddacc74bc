#include "rankstat/common.hpp"

namespace rankstat {

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidMatrix: return "InvalidMatrix";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::UnsupportedPhi: return "UnsupportedPhi";
    case ErrorKind::NotOnGraph: return "NotOnGraph";
    case ErrorKind::NotTangentDirection: return "NotTangentDirection";
    case ErrorKind::NotAdmissibleDirection: return "NotAdmissibleDirection";
    case ErrorKind::NotFeasible: return "NotFeasible";
    case ErrorKind::InnerSolveFailure: return "InnerSolveFailure";
    case ErrorKind::EmptySchedule: return "EmptySchedule";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Error";
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Verified: return "Verified";
    case Verdict::Refuted: return "Refuted";
    case Verdict::Unknown: return "Unknown";
  }
  return "Unknown";
}

double spectral_norm(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> s(A);
  return s.singularValues()(0);
}

double nuclear_norm(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> s(A);
  return s.singularValues().sum();
}

bool all_finite(const Matrix& A) { return A.allFinite(); }

}  // namespace rankstat
