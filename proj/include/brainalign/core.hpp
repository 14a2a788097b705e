#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace brainalign {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using RowVector = RowVectorX<double>;
// Row-major storage for tensors whose trailing axes are flattened into columns.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ErrorKind {
  Format,       // malformed bytes or text
  Unsupported,  // well-formed but outside what the engine accepts
  Truncation,   // payload shorter/longer than the header promises
  Validation,   // value-level invariant violated (non-finite, duplicate id ...)
  Io,
  Parameter,
  Range,
  Numerical,
  Alignment,  // stimulus ids do not line up
  Load,       // dataset-level failure, wraps the offending entry
  Config,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library. `code()` is a stable machine-readable
/// token (e.g. "BAD_MAGIC", "UNSUPPORTED_DTYPE"); `what()` is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

inline Error parameter_error(const std::string& message) {
  return Error(ErrorKind::Parameter, "PARAMETER", message);
}
inline Error range_error(const std::string& message) {
  return Error(ErrorKind::Range, "RANGE", message);
}

enum class FitScope { TrainFold, Global };

const char* to_string(FitScope scope) noexcept;
FitScope fit_scope_from_string(const std::string& s);

}  // namespace brainalign
