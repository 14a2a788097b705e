#include "brainalign/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "brainalign/log.hpp"
#include "brainalign/metrics.hpp"
#include "brainalign/parallel.hpp"
#include "brainalign/preprocess.hpp"
#include "brainalign/rng.hpp"

namespace brainalign {

std::vector<double> log_spaced_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi >= lo) || points < 1) throw parameter_error("alpha grid: need 0 < lo <= hi and points >= 1");
  if (points == 1) return {lo};
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (points - 1));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

void CVConfig::validate() const {
  if (k_folds < 2) throw parameter_error("k_folds must be >= 2");
  if (alpha_grid.empty()) throw parameter_error("alpha grid is empty");
  for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
    if (!(alpha_grid[i] > 0.0) || !std::isfinite(alpha_grid[i])) throw parameter_error("alpha grid values must be positive");
    if (i && !(alpha_grid[i] > alpha_grid[i - 1])) throw parameter_error("alpha grid must be strictly ascending");
  }
  if (pca_components < 0 || pca_feature_components < 0) throw parameter_error("PCA component counts must be >= 0");
  if (jobs < 1) throw parameter_error("jobs must be >= 1");
}

// ---------------------------------------------------------------------------
// Folds

std::pair<Index, Index> FoldPlan::bounds(int fold) const noexcept {
  const Index n_rows = n();
  return {fold * n_rows / k, (fold + 1) * n_rows / k};
}

std::vector<Index> FoldPlan::test_rows(int fold) const {
  const auto [lo, hi] = bounds(fold);
  return {order.begin() + lo, order.begin() + hi};
}

std::vector<Index> FoldPlan::train_rows(int fold) const {
  const auto [lo, hi] = bounds(fold);
  std::vector<Index> rows(order.begin(), order.begin() + lo);
  rows.insert(rows.end(), order.begin() + hi, order.end());
  return rows;
}

std::vector<int> FoldPlan::assignment() const {
  std::vector<int> fold_of(order.size());
  for (int f = 0; f < k; ++f) {
    const auto [lo, hi] = bounds(f);
    for (Index i = lo; i < hi; ++i) fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = f;
  }
  return fold_of;
}

FoldPlan FoldPlan::shuffled(Index n, int k, std::uint64_t seed) {
  Rng rng(seed);
  return {rng.permutation(n), k};
}

FoldPlan FoldPlan::contiguous(Index n, int k) {
  FoldPlan plan{std::vector<Index>(static_cast<std::size_t>(n)), k};
  for (Index i = 0; i < n; ++i) plan.order[static_cast<std::size_t>(i)] = i;
  return plan;
}

// ---------------------------------------------------------------------------
// Scoring

std::vector<std::optional<double>> column_correlations(const Eigen::Ref<const Matrix>& yhat,
                                                       const Eigen::Ref<const Matrix>& y) {
  if (yhat.rows() != y.rows() || yhat.cols() != y.cols()) throw parameter_error("score: shape mismatch");
  if (y.rows() < 3) throw parameter_error("score: need at least 3 rows");
  std::vector<std::optional<double>> r(static_cast<std::size_t>(y.cols()));
  for (Index j = 0; j < y.cols(); ++j) r[static_cast<std::size_t>(j)] = pearson(yhat.col(j), y.col(j));
  return r;
}

double score_pearson_columns(const Eigen::Ref<const Matrix>& yhat, const Eigen::Ref<const Matrix>& y,
                             ScoreMode mode) {
  if (mode == ScoreMode::Flattened) {
    if (yhat.rows() != y.rows() || yhat.cols() != y.cols()) throw parameter_error("score: shape mismatch");
    if (y.rows() < 3) throw parameter_error("score: need at least 3 rows");
    const Matrix a = yhat, b = y;
    return pearson(a.reshaped(), b.reshaped()).value_or(0.0);
  }
  const auto r = column_correlations(yhat, y);
  if (r.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& v : r) sum += v.value_or(0.0);
  return sum / static_cast<double>(r.size());
}

namespace {

Index count_undefined(const Eigen::Ref<const Matrix>& yhat, const Eigen::Ref<const Matrix>& y) {
  Index n = 0;
  for (const auto& v : column_correlations(yhat, y)) n += v ? 0 : 1;
  return n;
}

int inner_fold_count(Index n_train, int k) {
  const auto by_size = static_cast<int>(n_train / 3);
  const int k_inner = std::min(k, by_size);
  if (k_inner < 2)
    throw parameter_error("select_alpha: " + std::to_string(n_train) +
                          " training rows cannot be split into 2 inner folds of >= 3 rows");
  return k_inner;
}

}  // namespace

std::vector<double> alpha_curve(const Eigen::Ref<const Matrix>& x_train, const Eigen::Ref<const Matrix>& y_train,
                                const CVConfig& cfg, const FoldPlan& inner) {
  if (x_train.rows() != y_train.rows()) throw parameter_error("select_alpha: row count mismatch");
  if (cfg.alpha_grid.empty()) throw parameter_error("select_alpha: empty alpha grid");
  std::vector<double> totals(cfg.alpha_grid.size(), 0.0);
  for (int f = 0; f < inner.k; ++f) {
    const auto tr = inner.train_rows(f);
    const auto va = inner.test_rows(f);
    const Matrix xtr = x_train(tr, Eigen::all);
    const Matrix ytr = y_train(tr, Eigen::all);
    const RowVector x_mean = xtr.colwise().mean();
    const RowVector y_mean = ytr.colwise().mean();
    // One SVD per fold; every α is then a diagonal reweighting.
    Eigen::BDCSVD<Matrix> svd(xtr.rowwise() - x_mean, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const Matrix proj_val = (x_train(va, Eigen::all).rowwise() - x_mean) * svd.matrixV();
    const Matrix uty = svd.matrixU().transpose() * (ytr.rowwise() - y_mean);
    const Matrix y_val = y_train(va, Eigen::all);
    for (std::size_t a = 0; a < cfg.alpha_grid.size(); ++a) {
      const Vector shrink = s.array() / (s.array().square() + cfg.alpha_grid[a]);
      const Matrix pred = (proj_val * shrink.asDiagonal() * uty).rowwise() + y_mean;
      totals[a] += score_pearson_columns(pred, y_val, cfg.score_mode);
    }
  }
  for (auto& t : totals) t /= inner.k;
  return totals;
}

double select_alpha(const Eigen::Ref<const Matrix>& x_train, const Eigen::Ref<const Matrix>& y_train,
                    const CVConfig& cfg, const FoldPlan& inner) {
  const auto curve = alpha_curve(x_train, y_train, cfg, inner);
  std::size_t best = 0;
  for (std::size_t a = 1; a < curve.size(); ++a)
    if (curve[a] > curve[best]) best = a;
  return cfg.alpha_grid[best];
}

double select_alpha(const Eigen::Ref<const Matrix>& x_train, const Eigen::Ref<const Matrix>& y_train,
                    const CVConfig& cfg) {
  cfg.validate();
  const int k_inner = inner_fold_count(x_train.rows(), cfg.k_folds);
  return select_alpha(x_train, y_train, cfg, FoldPlan::shuffled(x_train.rows(), k_inner, cfg.rng_seed));
}

// ---------------------------------------------------------------------------
// Cross-validated encoding

namespace {

// Standardisation and PCA for one fitting scope (a training fold or all rows).
struct FoldTransform {
  std::optional<StandardizerState<double>> x_std, y_std;
  std::optional<PCAState<double>> x_pca, y_pca;

  static FoldTransform fit(const Matrix& x, const Matrix& y, const CVConfig& cfg, const std::string& label) {
    FoldTransform t;
    Matrix xs = x, ys = y;
    if (cfg.standardize) {
      t.x_std = standardize_fit(x, label);
      t.y_std = standardize_fit(y, label);
      xs = standardize_apply(*t.x_std, x);
      ys = standardize_apply(*t.y_std, y);
    }
    if (cfg.pca_features && cfg.pca_feature_components > 0)
      t.x_pca = pca_fit(xs, clamp_pca_components(cfg.pca_feature_components, xs.rows(), xs.cols()));
    if (cfg.pca_components > 0)
      t.y_pca = pca_fit(ys, clamp_pca_components(cfg.pca_components, ys.rows(), ys.cols()));
    return t;
  }

  Matrix features(const Matrix& x) const {
    Matrix out = x_std ? standardize_apply(*x_std, x) : x;
    return x_pca ? pca_transform(*x_pca, out) : out;
  }
  Matrix targets(const Matrix& y) const {
    Matrix out = y_std ? standardize_apply(*y_std, y) : y;
    return y_pca ? pca_transform(*y_pca, out) : out;
  }
  Matrix original_space(const Matrix& t) const {
    Matrix out = y_pca ? pca_inverse(*y_pca, t) : t;
    return y_std ? standardize_invert(*y_std, out) : out;
  }
};

}  // namespace

CVResult cv_encode(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y, const CVConfig& cfg) {
  cfg.validate();
  return cv_encode(x, y, cfg, FoldPlan::shuffled(x.rows(), cfg.k_folds, cfg.rng_seed));
}

CVResult cv_encode(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y, const CVConfig& cfg,
                   const FoldPlan& plan) {
  cfg.validate();
  const Index n = x.rows();
  if (y.rows() != n) throw parameter_error("cv_encode: X and Y row counts differ");
  if (plan.n() != n || plan.k < 2) throw parameter_error("cv_encode: fold plan does not cover the rows");
  if (n < plan.k)
    throw parameter_error("cv_encode: " + std::to_string(n) + " rows < " + std::to_string(plan.k) + " folds");
  if (n / plan.k < 3)
    throw parameter_error("cv_encode: " + std::to_string(n) + " rows leave fewer than 3 held-out rows per fold");

  std::optional<FoldTransform> global;
  if (cfg.fit_scope == FitScope::Global) global = FoldTransform::fit(x, y, cfg, "global");

  CVResult result;
  result.plan = plan;
  result.oof = Matrix::Zero(n, y.cols());
  result.score.fold_scores.assign(static_cast<std::size_t>(plan.k), 0.0);
  result.score.fold_alphas.assign(static_cast<std::size_t>(plan.k), 0.0);
  std::vector<Index> undefined(static_cast<std::size_t>(plan.k), 0);
  std::vector<Index> dims(static_cast<std::size_t>(plan.k), 0);

  parallel_for(static_cast<std::size_t>(plan.k), cfg.jobs, [&](std::size_t fi) {
    const int f = static_cast<int>(fi);
    const auto tr = plan.train_rows(f);
    const auto te = plan.test_rows(f);
    const Matrix x_tr = x(tr, Eigen::all), y_tr = y(tr, Eigen::all);
    const Matrix x_te = x(te, Eigen::all), y_te = y(te, Eigen::all);
    const FoldTransform transform =
        global ? *global
               : FoldTransform::fit(x_tr, y_tr, cfg, "fold " + std::to_string(f + 1) + "/" + std::to_string(plan.k));
    const Matrix f_tr = transform.features(x_tr), f_te = transform.features(x_te);
    const Matrix t_tr = transform.targets(y_tr), t_te = transform.targets(y_te);

    const auto inner = FoldPlan::contiguous(f_tr.rows(), inner_fold_count(f_tr.rows(), plan.k));
    const double alpha = select_alpha(f_tr, t_tr, cfg, inner);
    const auto fit = ridge_solve(f_tr, t_tr, alpha);
    const Matrix pred = predict(fit, f_te);

    result.score.fold_scores[fi] = score_pearson_columns(pred, t_te, cfg.score_mode);
    result.score.fold_alphas[fi] = alpha;
    undefined[fi] = cfg.score_mode == ScoreMode::PerColumn ? count_undefined(pred, t_te) : 0;
    dims[fi] = t_te.cols();
    result.oof(te, Eigen::all) = transform.original_space(pred);
  });

  double sum = 0.0;
  for (double s : result.score.fold_scores) sum += s;
  result.score.rho = sum / plan.k;
  for (auto u : undefined) result.undefined_columns += u;
  result.target_dims = dims.front();
  return result;
}

LayerScores encode_layers(const FeatureTensor& features, const Eigen::Ref<const Matrix>& y_aligned,
                          const std::vector<Index>& rows, const CVConfig& cfg) {
  LayerScores scores(static_cast<std::size_t>(features.n_layers));
  CVConfig inner = cfg;
  inner.jobs = 1;
  parallel_for(scores.size(), cfg.jobs, [&](std::size_t l) {
    const Matrix x = features.layer(static_cast<Index>(l))(rows, Eigen::all);
    scores[l] = cv_encode(x, y_aligned, inner).score;
  });
  return scores;
}

Matrix channel_window_encode(const Eigen::Ref<const Matrix>& x, const EEGEpochs& epochs,
                             const std::vector<std::pair<double, double>>& windows, const CVConfig& cfg) {
  if (x.rows() != epochs.n_trials())
    throw parameter_error("channel_window_encode: feature rows do not match trials");
  cfg.validate();
  CVConfig cell_cfg = cfg;
  cell_cfg.jobs = 1;
  if (cfg.channel_target == ChannelTarget::WindowMean) cell_cfg.pca_components = 0;

  std::vector<Matrix> means;
  for (const auto& [start, end] : windows) means.push_back(window_channel_means(epochs, start, end));
  const auto plan = FoldPlan::shuffled(x.rows(), cfg.k_folds, cfg.rng_seed);
  const Index n_channels = epochs.n_channels;
  const auto n_windows = static_cast<Index>(windows.size());
  Matrix r(n_channels, n_windows);
  parallel_for(static_cast<std::size_t>(n_channels * n_windows), cfg.jobs, [&](std::size_t cell) {
    const Index c = static_cast<Index>(cell) / n_windows;
    const Index w = static_cast<Index>(cell) % n_windows;
    Matrix target;
    if (cfg.channel_target == ChannelTarget::WindowMean) {
      target = means[static_cast<std::size_t>(w)].col(c);
    } else {
      const auto [first, last] =
          window_samples(epochs, windows[static_cast<std::size_t>(w)].first, windows[static_cast<std::size_t>(w)].second);
      target = epochs.data.middleCols(c * epochs.n_times + first, last - first);
    }
    r(c, w) = cv_encode(x, target, cell_cfg, plan).score.rho;
  });
  return r;
}

std::pair<Index, Index> LayerTimeGrid::argmax() const {
  std::pair<Index, Index> best{0, 0};
  for (Index l = 0; l < rho.rows(); ++l)
    for (Index w = 0; w < rho.cols(); ++w)
      if (rho(l, w) > rho(best.first, best.second)) best = {l, w};
  return best;
}

LayerTimeGrid layer_time_grid(const FeatureTensor& features, const EEGEpochs& epochs, double window_ms,
                              const CVConfig& cfg) {
  cfg.validate();
  const auto rows = match_rows(features, epochs.stimulus_ids);
  LayerTimeGrid grid;
  grid.windows = tile_windows(epochs, window_ms);
  std::vector<Matrix> targets;
  for (const auto& [start, end] : grid.windows) targets.push_back(window_flatten(epochs, start, end));
  const auto plan = FoldPlan::shuffled(epochs.n_trials(), cfg.k_folds, cfg.rng_seed);
  CVConfig cell_cfg = cfg;
  cell_cfg.jobs = 1;
  const Index n_windows = static_cast<Index>(grid.windows.size());
  grid.rho.resize(features.n_layers, n_windows);
  parallel_for(static_cast<std::size_t>(features.n_layers * n_windows), cfg.jobs, [&](std::size_t cell) {
    const Index l = static_cast<Index>(cell) / n_windows;
    const Index w = static_cast<Index>(cell) % n_windows;
    const Matrix x = features.layer(l)(rows, Eigen::all);
    grid.rho(l, w) = cv_encode(x, targets[static_cast<std::size_t>(w)], cell_cfg, plan).score.rho;
  });
  return grid;
}

}  // namespace brainalign
