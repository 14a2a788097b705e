#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "brainalign/metrics.hpp"
#include "brainalign/rng.hpp"
#include "brainalign/stats.hpp"
#include "brainalign/synth.hpp"
#include "doctest.h"

using namespace brainalign;
using doctest::Approx;

// Reference values frozen from scipy.stats.t / scipy.special.betainc.
TEST_CASE("student t quantiles match reference tables") {
  const std::array<std::array<double, 3>, 40> table{{
      {0.5, 1.0, 0.0},
      {0.9, 1.0, 3.0776835372078066},
      {0.975, 1.0, 12.706204736432095},
      {0.995, 1.0, 63.656741162873992},
      {0.9999, 1.0, 3183.0987571537103},
      {0.5, 2.0, 0.0},
      {0.9, 2.0, 1.8856180831641507},
      {0.975, 2.0, 4.3026527296961419},
      {0.995, 2.0, 9.9248432009180707},
      {0.9999, 2.0, 70.700071074968861},
      {0.5, 3.0, 0.0},
      {0.9, 3.0, 1.6377443536962095},
      {0.975, 3.0, 3.1824463052842629},
      {0.995, 3.0, 5.8409093097333518},
      {0.9999, 3.0, 22.203742273205002},
      {0.5, 4.0, 0.0},
      {0.9, 4.0, 1.5332062740589432},
      {0.975, 4.0, 2.7764451051977987},
      {0.995, 4.0, 4.6040948714158967},
      {0.9999, 4.0, 13.033671721107503},
      {0.5, 5.0, 0.0},
      {0.9, 5.0, 1.4758840488558216},
      {0.975, 5.0, 2.5705818356363141},
      {0.995, 5.0, 4.0321429835575362},
      {0.9999, 5.0, 9.677566300886502},
      {0.5, 10.0, 0.0},
      {0.9, 10.0, 1.3721836411102863},
      {0.975, 10.0, 2.2281388519649385},
      {0.995, 10.0, 3.16927267261695},
      {0.9999, 10.0, 5.6938201015118288},
      {0.5, 30.0, 0.0},
      {0.9, 30.0, 1.310415025391396},
      {0.975, 30.0, 2.0422724563012373},
      {0.995, 30.0, 2.7499956535670305},
      {0.9999, 30.0, 4.2339859572720595},
      {0.5, 100.0, 0.0},
      {0.9, 100.0, 1.2900747613398769},
      {0.975, 100.0, 1.9839715184496334},
      {0.995, 100.0, 2.6258905214380177},
      {0.9999, 100.0, 3.8615997909500837},
  }};
  for (const auto& [p, df, q] : table) {
    CAPTURE(p);
    CAPTURE(df);
    const double got = student_t_quantile(p, df);
    CHECK(std::abs(got - q) <= 1e-8 * std::max(1.0, std::abs(q)));
    CHECK(student_t_quantile(1.0 - p, df) == Approx(-got).epsilon(1e-12));
  }
}

TEST_CASE("student t cdf and survival function") {
  const std::array<std::array<double, 4>, 6> table{{
      {0.5, 3.0, 0.67427601757592459, 0.32572398242407552},
      {-1.2, 4.0, 0.14817569665617669, 0.85182430334382331},
      {2.0, 10.0, 0.96330598261462974, 0.036694017385370196},
      {3.5, 7.0, 0.99500347955905721, 0.0049965204409427718},
      {10.0, 4.0, 0.99971899818864207, 0.00028100181135799556},
      {-6.0, 30.0, 6.9713843836023587e-07, 0.99999930286156158},
  }};
  for (const auto& [t, df, cdf, sf] : table) {
    CHECK(student_t_cdf(t, df) == Approx(cdf).epsilon(1e-12));
    CHECK(student_t_sf(t, df) == Approx(sf).epsilon(1e-12));
  }
  CHECK(student_t_sf(std::numeric_limits<double>::infinity(), 4) == 0.0);
  CHECK(student_t_cdf(-std::numeric_limits<double>::infinity(), 4) == 0.0);
}

TEST_CASE("regularised incomplete beta") {
  const std::array<std::array<double, 4>, 5> table{{
      {0.5, 0.5, 0.3, 0.36901011956554536},
      {2.0, 3.0, 0.4, 0.52479999999999993},
      {10.0, 2.0, 0.9, 0.6973568802000002},
      {1.5, 20.0, 0.05, 0.44342120168568988},
      {50.0, 50.0, 0.5, 0.50000000000000044},
  }};
  for (const auto& [a, b, x, v] : table) CHECK(incomplete_beta(a, b, x) == Approx(v).epsilon(1e-12));
  CHECK(incomplete_beta(2, 3, 0.0) == 0.0);
  CHECK(incomplete_beta(2, 3, 1.0) == 1.0);
}

TEST_CASE("aggregate_subjects") {
  const std::vector<double> two{0.2, 0.3};
  const auto a = aggregate_subjects(two);
  CHECK(a.mean == Approx(0.25));
  CHECK(*a.std == Approx(std::sqrt(0.005)).epsilon(1e-14));
  const std::vector<double> same{0.4, 0.4, 0.4};
  CHECK(*aggregate_subjects(same).std == 0.0);
  const std::vector<double> one{0.7};
  CHECK_FALSE(aggregate_subjects(one).std.has_value());
  CHECK_THROWS_AS(aggregate_subjects(std::vector<double>{}), Error);

  Rng rng(4);
  std::vector<double> ten(10);
  for (double& v : ten) v = rng.normal();
  double m = 0;
  for (double v : ten) m += v;
  m /= 10;
  double ss = 0;
  for (double v : ten) ss += (v - m) * (v - m);
  const auto g = aggregate_subjects(ten);
  CHECK(g.mean == Approx(m).epsilon(1e-12));
  CHECK(*g.std == Approx(std::sqrt(ss / 9)).epsilon(1e-12));
  std::reverse(ten.begin(), ten.end());
  CHECK(aggregate_subjects(ten).mean == Approx(g.mean).epsilon(1e-15));
}

TEST_CASE("exact line gives slope, intercept and R2 exactly") {
  const std::vector<double> x{0, 1, 2, 3, 4, 5}, y{1, 3, 5, 7, 9, 11};
  const auto r = ols_fit(x, y);
  CHECK(r.slope == Approx(2.0).epsilon(1e-12));
  CHECK(r.intercept == Approx(1.0).epsilon(1e-12));
  CHECK(r.r_squared == Approx(1.0).epsilon(1e-12));
  CHECK(r.p_value > 0.0);
  CHECK(r.p_value < 1e-10);
}

TEST_CASE("ols matches scipy linregress") {
  const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8};
  const std::vector<double> y{2.1, 3.9, 6.2, 7.8, 10.1, 12.3, 13.8, 16.2};
  auto r = ols_fit(x, y);
  CHECK(r.slope == Approx(2.0095238095238095).epsilon(1e-12));
  CHECK(r.intercept == Approx(0.0071428571428580057).epsilon(1e-9));
  CHECK(r.r_squared == Approx(0.99849175511485655).epsilon(1e-12));
  CHECK(r.p_value == Approx(1.072781786663949e-09).epsilon(1e-8));
  CHECK(r.slope_se == Approx(0.031884618137460768).epsilon(1e-12));

  const std::vector<double> y2{0.3, -0.1, 0.4, 0.2, -0.5, 0.1, 0.0, 0.6};
  r = ols_fit(x, y2);
  CHECK(r.p_value == Approx(0.83856609769225354).epsilon(1e-10));
  const auto [lo, hi] = r.band(2.5);
  CHECK((hi - lo) / 2 == Approx(0.41642857921325965).epsilon(1e-10));
  CHECK((hi + lo) / 2 == Approx(r.predict(2.5)).epsilon(1e-14));
}

TEST_CASE("R2 equals squared pearson") {
  Rng rng(12);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(20), y(20);
    for (int i = 0; i < 20; ++i) {
      x[static_cast<std::size_t>(i)] = rng.normal();
      y[static_cast<std::size_t>(i)] = 0.5 * x[static_cast<std::size_t>(i)] + rng.normal();
    }
    const double r = *pearson(Eigen::Map<Vector>(x.data(), 20), Eigen::Map<Vector>(y.data(), 20));
    const auto fit = ols_fit(x, y);
    CHECK(std::abs(fit.r_squared - r * r) < 1e-12);
    CHECK(fit.r_squared >= 0.0);
    CHECK(fit.r_squared <= 1.0);
    CHECK(fit.p_value > 0.0);
    CHECK(fit.p_value <= 1.0);
  }
}

TEST_CASE("independent y: slope CI covers 0 in at least 90% of seeds") {
  int covered = 0;
  for (int seed = 0; seed < 200; ++seed) {
    Rng rng(derive_seed(5, static_cast<std::uint64_t>(seed)));
    std::vector<double> x(50), y(50);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    const auto [lo, hi] = ols_fit(x, y).slope_ci();
    covered += lo <= 0.0 && 0.0 <= hi;
  }
  CHECK(covered >= 180);
}

TEST_CASE("ols rejects constant x and short input") {
  CHECK_THROWS_AS(ols_fit(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), Error);
  CHECK_THROWS_AS(ols_fit(std::vector<double>{1, 2}, std::vector<double>{1, 2}), Error);
}

TEST_CASE("significance: huge effect and degenerate fold scores") {
  NullDistribution null;
  Rng rng(3);
  for (int i = 0; i < 200; ++i) null.values.push_back(0.01 * rng.normal());
  const std::vector<double> folds{0.5, 0.5, 0.5, 0.5, 0.5};
  const auto s = significance_test(folds, null);
  CHECK(s.degenerate);
  CHECK(s.p_t < 1e-4);
  CHECK(s.empirical_p == Approx(1.0 / 201.0));
  CHECK(s.df == 4);

  const std::vector<double> spread{0.48, 0.52, 0.5, 0.47, 0.53};
  const auto t = significance_test(spread, null);
  CHECK_FALSE(t.degenerate);
  CHECK(t.p_t < 1e-4);
  CHECK(t.empirical_p == Approx(1.0 / 201.0));
  CHECK(t.t > 0);
}

TEST_CASE("empirical p is within [1/(n+1), 1]") {
  NullDistribution null;
  for (int i = 0; i < 20; ++i) null.values.push_back(i);
  CHECK(significance_test(std::vector<double>{-5, -4}, null).empirical_p == 1.0);
  CHECK(significance_test(std::vector<double>{100, 101}, null).empirical_p == Approx(1.0 / 21));
  CHECK_THROWS_AS(significance_test(std::vector<double>{1.0}, null), Error);
  CHECK_THROWS_AS(significance_test(std::vector<double>{1.0, 2.0}, NullDistribution{}), Error);
}

TEST_CASE("empirical p is calibrated when the observation is exchangeable with the null") {
  // Null entries and the observed statistic are both means of five N(0,1)
  // fold scores, as in a permutation null.
  int rejections = 0;
  for (int rep = 0; rep < 200; ++rep) {
    Rng rng(derive_seed(17, static_cast<std::uint64_t>(rep)));
    auto fold_scores = [&] {
      std::vector<double> f(5);
      for (auto& v : f) v = rng.normal();
      return f;
    };
    NullDistribution null;
    for (int i = 0; i < 200; ++i) {
      const auto f = fold_scores();
      null.values.push_back((f[0] + f[1] + f[2] + f[3] + f[4]) / 5.0);
    }
    rejections += significance_test(fold_scores(), null).empirical_p < 0.05;
  }
  CHECK(rejections >= 2);
  CHECK(rejections <= 20);
}

TEST_CASE("permutation null: reproducible, beaten by signal, centred on noise") {
  const auto d = gen_linear_dataset(100, 6, 4, 4.0, 2);
  CVConfig cfg;
  cfg.pca_components = 0;
  const auto null = permutation_null(d.x, d.y, cfg, 50, 9);
  CHECK(null.values.size() == 50);
  CHECK(permutation_null(d.x, d.y, cfg, 50, 9).values == null.values);
  const double observed = cv_encode(d.x, d.y, cfg).score.rho;
  CHECK(*std::max_element(null.values.begin(), null.values.end()) < observed);
  CHECK(std::abs(null.mean()) < 2.0 / std::sqrt(50.0 * 4.0));
  CHECK_THROWS_AS(permutation_null(d.x, d.y, cfg, 0, 1), Error);

  CVConfig par = cfg;
  par.jobs = 3;
  CHECK(permutation_null(d.x, d.y, par, 50, 9).values == null.values);
}
