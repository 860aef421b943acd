#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mildreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A grid function: one value per node of a Grid1D. The grid travels alongside.
using StateVector = Eigen::VectorXd;

enum class ErrorCode {
  InvalidArgument,
  NoWindow,
  NonContractive,
  MaxIter,
  Config,
  Unresolved,
  Singular,
  Overflow,
  Io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorCode::InvalidArgument, what);
}

}  // namespace mildreg
