#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "brainalign/core.hpp"
#include "brainalign/encoder.hpp"

namespace brainalign {

// Student-t distribution via the regularised incomplete beta function.
double incomplete_beta(double a, double b, double x);  // I_x(a, b)
double student_t_cdf(double t, double df);
double student_t_sf(double t, double df);  // 1 - cdf, accurate in the upper tail
double student_t_quantile(double p, double df);

struct NullDistribution {
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::string statistic_name;

  double mean() const;
  double stddev() const;
};

/// Re-runs cv_encode with rows of Y shuffled (seeded per permutation) while
/// X, the fold plan and the α-selection protocol stay fixed.
NullDistribution permutation_null(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y,
                                  const CVConfig& cfg, int n_perm = 200, std::uint64_t seed = 0);

struct SignificanceResult {
  double t = 0.0;
  int df = 0;
  double p_t = 1.0;          // one-sided: fold scores above the null mean
  double empirical_p = 1.0;  // (1 + #{null >= observed mean}) / (1 + n_perm)
  bool degenerate = false;   // fold scores have zero variance
};

/// One-sample t-test of the fold scores against the null mean (df = k - 1),
/// plus the empirical permutation p-value. Zero-variance fold scores give
/// t = ±inf (or NaN when equal to the null mean) with `degenerate` set.
SignificanceResult significance_test(std::span<const double> fold_scores, const NullDistribution& null);

struct Aggregate {
  double mean = 0.0;
  std::optional<double> std;  // sample (n - 1) std; undefined for one value
  std::size_t n = 0;
};

Aggregate aggregate_subjects(std::span<const double> values);

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double p_value = 1.0;  // two-sided t-test on the slope, n - 2 df
  std::size_t n = 0;
  double slope_se = 0.0;
  double residual_se = 0.0;
  double x_mean = 0.0;
  double sxx = 0.0;
  double t_crit = 0.0;  // t_{0.975, n-2}

  double predict(double x) const { return intercept + slope * x; }
  /// 95% confidence band of the conditional mean at x.
  std::pair<double, double> band(double x) const;
  std::pair<double, double> slope_ci() const { return {slope - t_crit * slope_se, slope + t_crit * slope_se}; }
};

RegressionResult ols_fit(std::span<const double> x, std::span<const double> y);

}  // namespace brainalign
