#include "brainalign/stats.hpp"

#include <cmath>
#include <limits>

#include "brainalign/parallel.hpp"
#include "brainalign/rng.hpp"

namespace brainalign {

namespace {

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 100000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw Error(ErrorKind::Numerical, "NO_CONVERGENCE", "incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw parameter_error("incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw parameter_error("incomplete_beta: x outside [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_sf(double t, double df) {
  if (!(df > 0.0)) throw parameter_error("student_t: df must be positive");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return t > 0 ? tail : 1.0 - tail;
}

double student_t_cdf(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  if (t > 0) return 1.0 - student_t_sf(t, df);
  return student_t_sf(-t, df);
}

double student_t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw parameter_error("student_t_quantile: p must lie in (0, 1)");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -student_t_quantile(1.0 - p, df);
  const double upper = 1.0 - p;
  double lo = 0.0, hi = 1.0;
  while (student_t_sf(hi, df) > upper) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw Error(ErrorKind::Numerical, "NO_CONVERGENCE", "student_t_quantile: bracket failed");
  }
  for (int i = 0; i < 400 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (student_t_sf(mid, df) > upper ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double NullDistribution::mean() const {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double NullDistribution::stddev() const {
  if (values.size() < 2) return 0.0;
  const double m = mean();
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

NullDistribution permutation_null(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y,
                                  const CVConfig& cfg, int n_perm, std::uint64_t seed) {
  if (n_perm < 1) throw parameter_error("permutation_null: n_perm must be >= 1");
  if (x.rows() != y.rows()) throw parameter_error("permutation_null: X and Y row counts differ");
  cfg.validate();
  const auto plan = FoldPlan::shuffled(x.rows(), cfg.k_folds, cfg.rng_seed);
  CVConfig inner = cfg;
  inner.jobs = 1;
  NullDistribution null;
  null.seed = seed;
  null.statistic_name = "cv_pearson";
  null.values.assign(static_cast<std::size_t>(n_perm), 0.0);
  parallel_for(null.values.size(), cfg.jobs, [&](std::size_t p) {
    Rng rng(derive_seed(seed, p));
    const auto perm = rng.permutation(y.rows());
    const Matrix shuffled = y(perm, Eigen::all);
    null.values[p] = cv_encode(x, shuffled, inner, plan).score.rho;
  });
  return null;
}

SignificanceResult significance_test(std::span<const double> fold_scores, const NullDistribution& null) {
  if (fold_scores.size() < 2) throw parameter_error("significance_test: need at least 2 fold scores");
  if (null.values.empty()) throw parameter_error("significance_test: empty null distribution");
  const auto k = static_cast<double>(fold_scores.size());
  double mean = 0.0;
  for (double s : fold_scores) mean += s;
  mean /= k;
  double ss = 0.0;
  for (double s : fold_scores) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / (k - 1.0));
  const double null_mean = null.mean();

  SignificanceResult r;
  r.df = static_cast<int>(fold_scores.size()) - 1;
  if (sd > 0.0) {
    r.t = (mean - null_mean) / (sd / std::sqrt(k));
    r.p_t = student_t_sf(r.t, r.df);
  } else {
    r.degenerate = true;
    if (mean > null_mean) {
      r.t = std::numeric_limits<double>::infinity();
      r.p_t = 0.0;
    } else if (mean < null_mean) {
      r.t = -std::numeric_limits<double>::infinity();
      r.p_t = 1.0;
    } else {
      r.t = std::numeric_limits<double>::quiet_NaN();
      r.p_t = 1.0;
    }
  }
  std::size_t exceed = 0;
  for (double v : null.values) exceed += v >= mean ? 1 : 0;
  r.empirical_p = static_cast<double>(1 + exceed) / static_cast<double>(1 + null.values.size());
  return r;
}

Aggregate aggregate_subjects(std::span<const double> values) {
  if (values.empty()) throw parameter_error("aggregate_subjects: no values");
  Aggregate a;
  a.n = values.size();
  double s = 0.0;
  for (double v : values) s += v;
  a.mean = s / static_cast<double>(a.n);
  // One refinement pass, so equal values give an exact mean and zero spread.
  double resid = 0.0;
  for (double v : values) resid += v - a.mean;
  a.mean += resid / static_cast<double>(a.n);
  if (a.n >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(a.n - 1));
  }
  return a;
}

std::pair<double, double> RegressionResult::band(double x) const {
  const double half = t_crit * residual_se *
                      std::sqrt(1.0 / static_cast<double>(n) + (x - x_mean) * (x - x_mean) / sxx);
  const double centre = predict(x);
  return {centre - half, centre + half};
}

RegressionResult ols_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw parameter_error("ols_fit: x and y lengths differ");
  if (x.size() < 3) throw parameter_error("ols_fit: need at least 3 points");
  const Eigen::Map<const Vector> xv(x.data(), static_cast<Index>(x.size()));
  const Eigen::Map<const Vector> yv(y.data(), static_cast<Index>(y.size()));
  RegressionResult r;
  r.n = x.size();
  const double n = static_cast<double>(r.n);
  r.x_mean = xv.mean();
  const double y_mean = yv.mean();
  const Vector dx = xv.array() - r.x_mean;
  const Vector dy = yv.array() - y_mean;
  r.sxx = dx.squaredNorm();
  if (!(r.sxx > 0.0)) throw parameter_error("ols_fit: x is constant");
  const double sxy = dx.dot(dy);
  const double syy = dy.squaredNorm();
  r.slope = sxy / r.sxx;
  r.intercept = y_mean - r.slope * r.x_mean;
  const double ss_res = std::max(0.0, (dy - r.slope * dx).squaredNorm());
  // Simple regression: R² = sxy² / (sxx syy), algebraically 1 - SS_res / SS_tot.
  r.r_squared = syy > 0.0 ? std::clamp(sxy / r.sxx * (sxy / syy), 0.0, 1.0) : 1.0;
  const double df = n - 2.0;
  r.residual_se = df > 0 ? std::sqrt(ss_res / df) : 0.0;
  r.slope_se = r.residual_se / std::sqrt(r.sxx);
  r.t_crit = student_t_quantile(0.975, df);
  if (r.slope_se > 0.0) {
    const double t = r.slope / r.slope_se;
    r.p_value = std::min(1.0, 2.0 * student_t_sf(std::abs(t), df));
    if (r.p_value <= 0.0) r.p_value = std::numeric_limits<double>::min();
  } else {
    r.p_value = r.slope != 0.0 ? std::numeric_limits<double>::min() : 1.0;
  }
  return r;
}

}  // namespace brainalign
