#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "brainalign/core.hpp"
#include "brainalign/dataset.hpp"

namespace brainalign {

// ---------------------------------------------------------------------------
// Column standardisation

template <typename Scalar>
struct StandardizerState {
  RowVectorX<Scalar> mean;
  RowVectorX<Scalar> std;  // degenerate columns store 1
  Eigen::Matrix<bool, 1, Eigen::Dynamic> degenerate;
  std::string fitted_on;   // e.g. "fold 2/5 train" or "global"
};

/// Population (1/n) standard deviation per column. Zero-variance columns keep
/// std = 1, so they map to exactly zero after centering.
template <typename Derived>
StandardizerState<typename Derived::Scalar> standardize_fit(const Eigen::MatrixBase<Derived>& x,
                                                            std::string fitted_on = "global") {
  using Scalar = typename Derived::Scalar;
  if (x.rows() < 2) throw parameter_error("standardize_fit: need at least 2 rows");
  StandardizerState<Scalar> s;
  s.mean = x.colwise().mean();
  s.std = ((x.rowwise() - s.mean).array().square().colwise().sum() / Scalar(x.rows())).sqrt().matrix();
  const Scalar floor = std::numeric_limits<Scalar>::epsilon() * Scalar(16);
  s.degenerate.setConstant(s.std.size(), false);
  for (Index j = 0; j < s.std.size(); ++j) {
    const Scalar scale = std::max(Scalar(1), std::abs(s.mean(j)));
    if (!(s.std(j) > floor * scale)) {
      s.std(j) = Scalar(1);
      s.degenerate(j) = true;
    }
  }
  s.fitted_on = std::move(fitted_on);
  return s;
}

template <typename Scalar, typename Derived>
MatrixX<Scalar> standardize_apply(const StandardizerState<Scalar>& s, const Eigen::MatrixBase<Derived>& x) {
  if (x.cols() != s.mean.size()) throw parameter_error("standardize_apply: column count mismatch");
  MatrixX<Scalar> out = (x.rowwise() - s.mean).array().rowwise() / s.std.array();
  for (Index j = 0; j < out.cols(); ++j)
    if (s.degenerate(j)) out.col(j).setZero();
  return out;
}

template <typename Scalar, typename Derived>
MatrixX<Scalar> standardize_invert(const StandardizerState<Scalar>& s, const Eigen::MatrixBase<Derived>& z) {
  return (z.array().rowwise() * s.std.array()).matrix().rowwise() + s.mean;
}

// ---------------------------------------------------------------------------
// PCA

template <typename Scalar>
struct PCAState {
  MatrixX<Scalar> components;  // d × k, orthonormal columns
  RowVectorX<Scalar> mean;     // 1 × d
  VectorX<Scalar> explained_variance_ratio;
};

/// Top-k right singular vectors of the centred data. Each component is
/// sign-normalised so its largest-magnitude loading is positive.
template <typename Derived>
PCAState<typename Derived::Scalar> pca_fit(const Eigen::MatrixBase<Derived>& x, Index k) {
  using Scalar = typename Derived::Scalar;
  const Index n = x.rows();
  const Index d = x.cols();
  if (k < 1 || k > std::min<Index>(n - 1, d))
    throw parameter_error("pca_fit: k = " + std::to_string(k) + " outside [1, min(n-1, d) = " +
                          std::to_string(std::min<Index>(n - 1, d)) + "]");
  PCAState<Scalar> st;
  st.mean = x.colwise().mean();
  const MatrixX<Scalar> centered = x.rowwise() - st.mean;
  Eigen::BDCSVD<MatrixX<Scalar>> svd(centered, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  st.components = svd.matrixV().leftCols(k);
  for (Index c = 0; c < k; ++c) {
    Index arg = 0;
    st.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (st.components(arg, c) < Scalar(0)) st.components.col(c) *= Scalar(-1);
  }
  const Scalar total = sv.squaredNorm();
  st.explained_variance_ratio =
      total > Scalar(0) ? VectorX<Scalar>(sv.head(k).array().square() / total) : VectorX<Scalar>::Zero(k);
  return st;
}

template <typename Scalar, typename Derived>
MatrixX<Scalar> pca_transform(const PCAState<Scalar>& st, const Eigen::MatrixBase<Derived>& x) {
  if (x.cols() != st.mean.size()) throw parameter_error("pca_transform: column count mismatch");
  return (x.rowwise() - st.mean) * st.components;
}

template <typename Scalar, typename Derived>
MatrixX<Scalar> pca_inverse(const PCAState<Scalar>& st, const Eigen::MatrixBase<Derived>& scores) {
  return (scores * st.components.transpose()).rowwise() + st.mean;
}

/// Clamps a requested component count to min(n - 1, d), warning when it bites.
Index clamp_pca_components(Index requested, Index n, Index d);

// ---------------------------------------------------------------------------
// Epoch operations

/// One trial per distinct stimulus (first-appearance order), each the mean of
/// that stimulus's repetitions.
EEGEpochs average_repetitions(const EEGEpochs& epochs);

/// Sample indices [first, last) whose onset-relative times fall in
/// [start_ms, end_ms). Throws range error when the window leaves the epoch or
/// holds no sample.
std::pair<Index, Index> window_samples(const EEGEpochs& epochs, double start_ms, double end_ms);

/// Subtracts, per trial and channel, the mean over samples in the baseline window.
EEGEpochs baseline_correct(const EEGEpochs& epochs, double baseline_start_ms, double baseline_end_ms);

/// n_trials × (n_channels · n_window_samples); row layout c0t0..c0tW, c1t0.. .
Matrix window_flatten(const EEGEpochs& epochs, double start_ms, double end_ms);

/// Per-channel mean amplitude inside the window: n_trials × n_channels.
Matrix window_channel_means(const EEGEpochs& epochs, double start_ms, double end_ms);

/// Non-overlapping windows of `width_ms` tiling [max(0, t_start), t_end); a
/// trailing partial window is dropped with a warning.
std::vector<std::pair<double, double>> tile_windows(const EEGEpochs& epochs, double width_ms);

}  // namespace brainalign
