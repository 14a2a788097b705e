#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "brainalign/core.hpp"

namespace brainalign {

enum class RidgePath { Auto, Primal, Dual };

struct RidgeOptions {
  bool fit_intercept = true;
  RidgePath path = RidgePath::Auto;
};

template <typename Scalar>
struct RidgeFit {
  MatrixX<Scalar> beta;          // d_in × d_out
  Scalar alpha{};
  RowVectorX<Scalar> intercept;  // 1 × d_out
};

namespace detail {

// beta = V diag(s / (s² + alpha)) Uᵀ Y; the fallback when Cholesky fails.
template <typename Scalar>
MatrixX<Scalar> ridge_via_svd(const MatrixX<Scalar>& x, const MatrixX<Scalar>& y, Scalar alpha) {
  Eigen::BDCSVD<MatrixX<Scalar>> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const Scalar tol = std::numeric_limits<Scalar>::epsilon() * static_cast<Scalar>(std::max(x.rows(), x.cols())) *
                     (s.size() ? s(0) : Scalar(0));
  if (alpha == Scalar(0) && (s.size() < std::min(x.rows(), x.cols()) || s.size() == 0 || s(s.size() - 1) <= tol ||
                             x.cols() > x.rows()))
    throw Error(ErrorKind::Numerical, "SINGULAR",
                "ridge_solve: XᵀX is singular at alpha = 0; use a positive alpha");
  VectorX<Scalar> shrink(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    const Scalar denom = s(i) * s(i) + alpha;
    shrink(i) = denom > Scalar(0) ? s(i) / denom : Scalar(0);
  }
  return svd.matrixV() * shrink.asDiagonal() * (svd.matrixU().transpose() * y);
}

}  // namespace detail

/// Closed-form ridge: beta = (XᵀX + αI)⁻¹ XᵀY on the primal path (d_in ≤ n)
/// or beta = Xᵀ(XXᵀ + αI)⁻¹ Y on the dual path (d_in > n). With
/// `fit_intercept`, X and Y are column-centred first and the intercept is
/// ȳ - x̄ beta, so the penalty never touches the mean.
template <typename DerivedX, typename DerivedY>
RidgeFit<typename DerivedX::Scalar> ridge_solve(const Eigen::MatrixBase<DerivedX>& x_in,
                                                const Eigen::MatrixBase<DerivedY>& y_in,
                                                typename DerivedX::Scalar alpha, RidgeOptions options = {}) {
  using Scalar = typename DerivedX::Scalar;
  using Mat = MatrixX<Scalar>;
  if (x_in.rows() != y_in.rows()) throw parameter_error("ridge_solve: X and Y row counts differ");
  if (x_in.rows() < 1) throw parameter_error("ridge_solve: need at least one row");
  if (!(alpha >= Scalar(0)) || !std::isfinite(alpha)) throw parameter_error("ridge_solve: alpha must be finite and >= 0");
  if (!x_in.allFinite() || !y_in.allFinite()) throw parameter_error("ridge_solve: non-finite input");

  RidgeFit<Scalar> fit;
  fit.alpha = alpha;
  Mat x = x_in;
  Mat y = y_in;
  RowVectorX<Scalar> x_mean = RowVectorX<Scalar>::Zero(x.cols());
  RowVectorX<Scalar> y_mean = RowVectorX<Scalar>::Zero(y.cols());
  if (options.fit_intercept) {
    x_mean = x.colwise().mean();
    y_mean = y.colwise().mean();
    x.rowwise() -= x_mean;
    y.rowwise() -= y_mean;
  }

  const Index n = x.rows(), d = x.cols();
  const bool dual = options.path == RidgePath::Dual || (options.path == RidgePath::Auto && d > n);
  bool solved = false;
  // alpha = 0 goes straight to the SVD so singular designs are detected.
  if (alpha > Scalar(0)) {
    if (dual) {
      Mat gram = x * x.transpose();
      gram.diagonal().array() += alpha;
      Eigen::LLT<Mat> llt(gram);
      if (llt.info() == Eigen::Success) {
        fit.beta = x.transpose() * llt.solve(y);
        solved = true;
      }
    } else {
      Mat gram = x.transpose() * x;
      gram.diagonal().array() += alpha;
      Eigen::LLT<Mat> llt(gram);
      if (llt.info() == Eigen::Success) {
        fit.beta = llt.solve(x.transpose() * y);
        solved = true;
      }
    }
  }
  if (!solved) fit.beta = detail::ridge_via_svd<Scalar>(x, y, alpha);
  fit.intercept = y_mean - x_mean * fit.beta;
  return fit;
}

template <typename Scalar, typename Derived>
MatrixX<Scalar> predict(const RidgeFit<Scalar>& fit, const Eigen::MatrixBase<Derived>& x) {
  if (x.cols() != fit.beta.rows())
    throw parameter_error("predict: X has " + std::to_string(x.cols()) + " columns, fit expects " +
                          std::to_string(fit.beta.rows()));
  return (x * fit.beta).rowwise() + fit.intercept;
}

}  // namespace brainalign
