#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "brainalign/core.hpp"
#include "brainalign/dataset.hpp"
#include "brainalign/ridge.hpp"

namespace brainalign {

/// How a matrix-valued prediction is reduced to one correlation.
enum class ScoreMode {
  PerColumn,  // mean over target columns of the per-column Pearson r
  Flattened,  // one Pearson r over all entries
};

/// Target for channel-wise encoding.
enum class ChannelTarget {
  WindowMean,  // the channel's mean amplitude in the window (scalar)
  Flattened,   // the channel's samples in the window
};

std::vector<double> log_spaced_grid(double lo, double hi, int points);

struct CVConfig {
  int k_folds = 5;
  std::vector<double> alpha_grid = log_spaced_grid(1e-2, 1e3, 20);
  std::uint64_t rng_seed = 0;
  FitScope fit_scope = FitScope::TrainFold;
  bool standardize = true;
  Index pca_components = 256;  // for targets; 0 disables PCA
  bool pca_features = false;
  Index pca_feature_components = 256;
  ScoreMode score_mode = ScoreMode::PerColumn;
  ChannelTarget channel_target = ChannelTarget::WindowMean;
  int jobs = 1;

  void validate() const;
};

/// A seeded shuffle of row indices; fold f is the contiguous chunk
/// order[f*n/k, (f+1)*n/k). Training rows keep their relative order in
/// `order`, so nested folds are again contiguous chunks.
struct FoldPlan {
  std::vector<Index> order;
  int k = 0;

  Index n() const noexcept { return static_cast<Index>(order.size()); }
  std::pair<Index, Index> bounds(int fold) const noexcept;
  std::vector<Index> test_rows(int fold) const;
  std::vector<Index> train_rows(int fold) const;
  /// Fold index of every row.
  std::vector<int> assignment() const;

  static FoldPlan shuffled(Index n, int k, std::uint64_t seed);
  static FoldPlan contiguous(Index n, int k);
};

/// Per-column correlations; undefined (constant column) entries are nullopt.
std::vector<std::optional<double>> column_correlations(const Eigen::Ref<const Matrix>& yhat,
                                                       const Eigen::Ref<const Matrix>& y);

/// Mean per-column Pearson r (or flattened r). Undefined columns count as 0.
double score_pearson_columns(const Eigen::Ref<const Matrix>& yhat, const Eigen::Ref<const Matrix>& y,
                             ScoreMode mode = ScoreMode::PerColumn);

/// Grid value with the best mean inner-fold score; ties go to the smaller α.
double select_alpha(const Eigen::Ref<const Matrix>& x_train, const Eigen::Ref<const Matrix>& y_train,
                    const CVConfig& cfg);
double select_alpha(const Eigen::Ref<const Matrix>& x_train, const Eigen::Ref<const Matrix>& y_train,
                    const CVConfig& cfg, const FoldPlan& inner);
/// Mean inner-fold score for every grid value (same order as the grid).
std::vector<double> alpha_curve(const Eigen::Ref<const Matrix>& x_train, const Eigen::Ref<const Matrix>& y_train,
                                const CVConfig& cfg, const FoldPlan& inner);

/// ρ for one layer: mean of per-fold held-out scores.
struct LayerScore {
  double rho = 0.0;
  std::vector<double> fold_scores;
  std::vector<double> fold_alphas;
};

struct CVResult {
  LayerScore score;
  FoldPlan plan;
  Matrix oof;               // out-of-fold predictions, original Y space, row order of Y
  Index target_dims = 0;    // columns the score is computed over (after PCA)
  Index undefined_columns = 0;
};

CVResult cv_encode(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y, const CVConfig& cfg);
CVResult cv_encode(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y, const CVConfig& cfg,
                   const FoldPlan& plan);

using LayerScores = std::vector<LayerScore>;

/// cv_encode for every layer against the same targets and folds.
LayerScores encode_layers(const FeatureTensor& features, const Eigen::Ref<const Matrix>& y_aligned,
                          const std::vector<Index>& rows, const CVConfig& cfg);

/// n_channels × n_windows cross-validated r, one encoding model per cell.
Matrix channel_window_encode(const Eigen::Ref<const Matrix>& x, const EEGEpochs& epochs,
                             const std::vector<std::pair<double, double>>& windows, const CVConfig& cfg);

struct LayerTimeGrid {
  Matrix rho;  // n_layers × n_windows
  std::vector<std::pair<double, double>> windows;
  std::pair<Index, Index> argmax() const;
};

/// Cell (l, w) = ρ of layer l against the flattened window w.
LayerTimeGrid layer_time_grid(const FeatureTensor& features, const EEGEpochs& epochs, double window_ms,
                              const CVConfig& cfg);

}  // namespace brainalign
