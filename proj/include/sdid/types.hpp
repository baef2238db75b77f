#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace sdid {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Index = Eigen::Index;

enum class ErrorCode {
  InvalidDefinition,
  Assembly,
  NonPhysicalStiffness,
  EigenSolver,
  DegenerateMode,
  MatchFailure,
  Divergence,
  Covariance,
  NotPositiveSemiDefinite,
  UndefinedGrid,
  NonFinite,
  InvalidArgument,
  Io,
};

const char* to_string(ErrorCode code);

/// Single exception type for the library; the code identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidDefinition: return "invalid definition";
    case ErrorCode::Assembly: return "assembly error";
    case ErrorCode::NonPhysicalStiffness: return "non-physical stiffness";
    case ErrorCode::EigenSolver: return "eigen-solver failure";
    case ErrorCode::DegenerateMode: return "degenerate mode";
    case ErrorCode::MatchFailure: return "mode match failure";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::Covariance: return "covariance error";
    case ErrorCode::NotPositiveSemiDefinite: return "matrix not positive semi-definite";
    case ErrorCode::UndefinedGrid: return "undefined grid";
    case ErrorCode::NonFinite: return "non-finite input";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::Io: return "i/o error";
  }
  return "error";
}

}  // namespace sdid
