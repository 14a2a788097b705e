#include <algorithm>
#include <numeric>

#include "brainalign/metrics.hpp"
#include "brainalign/rng.hpp"
#include "brainalign/synth.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace brainalign;
using doctest::Approx;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Matrix random_orthogonal(Rng& rng, Index d) {
  Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(d, d));
  return qr.householderQ();
}

}  // namespace

TEST_CASE("pearson examples") {
  CHECK(*pearson(vec({1, 2, 3}), vec({2, 4, 6})) == Approx(1.0).epsilon(1e-15));
  CHECK(*pearson(vec({1, 2, 3}), vec({3, 2, 1})) == Approx(-1.0).epsilon(1e-15));
  CHECK(*pearson(vec({1, 2, 3, 4}), vec({1, 3, 2, 4})) == Approx(0.8).epsilon(1e-14));
  CHECK_FALSE(pearson(vec({1, 1, 1}), vec({1, 2, 3})).has_value());
}

TEST_CASE("pearson matches the definition and is symmetric and affine invariant") {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const Vector x = rng.normal_matrix(20, 1).col(0);
    const Vector y = rng.normal_matrix(20, 1).col(0);
    const double r = *pearson(x, y);
    CHECK(r == Approx(testing::pearson_definition(x, y)).epsilon(1e-12));
    CHECK(*pearson(y, x) == Approx(r).epsilon(1e-14));
    const Vector ax = (3.5 * x.array() + 2.0).matrix();
    CHECK(*pearson(ax, y) == Approx(r).epsilon(1e-12));
  }
}

TEST_CASE("midranks share averaged ranks across ties") {
  const Vector r = midranks(vec({1, 2, 2, 3}));
  CHECK(r(0) == 1.0);
  CHECK(r(1) == 2.5);
  CHECK(r(2) == 2.5);
  CHECK(r(3) == 4.0);
}

TEST_CASE("spearman equals pearson of midranks exactly") {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    Vector x = rng.normal_matrix(10, 1).col(0);
    Vector y = rng.normal_matrix(10, 1).col(0);
    for (Index i = 0; i < 10; ++i) x(i) = std::round(x(i) * 2);  // ties
    CHECK(*spearman(x, y) == *pearson(midranks(x), midranks(y)));
    CHECK(*spearman(x, y) == Approx(testing::pearson_definition(midranks(x), midranks(y))).epsilon(1e-12));
  }
}

TEST_CASE("rank metrics are invariant under strictly increasing maps") {
  Rng rng(5);
  const Vector x = rng.normal_matrix(15, 1).col(0);
  const Vector y = rng.normal_matrix(15, 1).col(0);
  const Vector ex = x.array().exp().matrix();
  CHECK(*spearman(ex, x) == Approx(1.0).epsilon(1e-15));
  CHECK(*spearman(ex, y) == *spearman(x, y));
  CHECK(*kendall_tau(ex, y) == *kendall_tau(x, y));
  CHECK(*kendall_tau(x, y) == *kendall_tau(y, x));
}

TEST_CASE("kendall tau-b examples") {
  CHECK(*kendall_tau(vec({1, 2, 3, 4}), vec({2, 3, 5, 9})) == 1.0);
  CHECK(*kendall_tau(vec({1, 2, 3, 4}), vec({4, 3, 2, 1})) == -1.0);
  CHECK(*kendall_tau(vec({1, 2, 3}), vec({1, 3, 2})) == Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_FALSE(kendall_tau(vec({2, 2, 2}), vec({1, 2, 3})).has_value());
}

TEST_CASE("rank metrics equal the enumeration oracle on every permutation up to n = 8") {
  for (int n = 2; n <= 8; ++n) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Vector x(n);
    for (int i = 0; i < n; ++i) x(i) = i;
    do {
      Vector y(n);
      for (int i = 0; i < n; ++i) y(i) = perm[static_cast<std::size_t>(i)];
      const auto [s, k] = rank_oracle(x, y);
      REQUIRE(spearman(x, y) == s);
      REQUIRE(kendall_tau(x, y) == k);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST_CASE("tied inputs [1,1,2] vs [1,2,2] agree with the oracle") {
  const Vector x = vec({1, 1, 2}), y = vec({1, 2, 2});
  const auto [s, k] = rank_oracle(x, y);
  CHECK(spearman(x, y) == s);
  CHECK(kendall_tau(x, y) == k);
  CHECK(*k == Approx(0.5).epsilon(1e-15));
}

TEST_CASE("rank oracle caps its input length") {
  const Vector x = Vector::LinSpaced(13, 0, 12);
  CHECK_THROWS_AS(rank_oracle(x, x), Error);
}

TEST_CASE("linear CKA self similarity, invariances and oracle agreement") {
  Rng rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix a = rng.normal_matrix(8, 3);
    const Matrix b = rng.normal_matrix(8, 5);
    CHECK(*linear_cka(a, a) == Approx(1.0).epsilon(1e-10));
    CHECK(*linear_cka(a, b) == Approx(testing::naive_cka(a, b)).epsilon(1e-12));
    const Matrix q = random_orthogonal(rng, 5);
    CHECK(*linear_cka(a, b * q) == Approx(*linear_cka(a, b)).epsilon(1e-8));
    CHECK(*linear_cka(a, -2.5 * a) == Approx(1.0).epsilon(1e-10));
    const Matrix shifted = b.rowwise() + rng.normal_matrix(1, 5).row(0);
    CHECK(*linear_cka(a, shifted) == Approx(*linear_cka(a, b)).epsilon(1e-10));
  }
}

TEST_CASE("linear CKA feature-space route matches the oracle when n exceeds both widths") {
  Rng rng(8);
  const Matrix a = rng.normal_matrix(40, 3);
  const Matrix b = rng.normal_matrix(40, 4);
  CHECK(*linear_cka(a, b) == Approx(testing::naive_cka(a, b)).epsilon(1e-12));
}

TEST_CASE("linear CKA signals undefined for constant input") {
  const Matrix a = Matrix::Ones(5, 2);
  Rng rng(1);
  CHECK_FALSE(linear_cka(a, rng.normal_matrix(5, 2)).has_value());
  CHECK_THROWS_AS(linear_cka(Matrix(Matrix::Ones(2, 2)), Matrix(Matrix::Ones(2, 2))), Error);
}

TEST_CASE("RDM entries and structure") {
  Rng rng(4);
  Matrix x = rng.normal_matrix(6, 4);
  const RDM rdm = compute_rdm(x, {});
  for (Index i = 0; i < 6; ++i) {
    CHECK(rdm.values(i, i) == 0.0);
    for (Index j = 0; j < 6; ++j) {
      CHECK(rdm.values(i, j) == rdm.values(j, i));
      if (i != j) {
        const Vector ri = x.row(i).transpose(), rj = x.row(j).transpose();
        CHECK(rdm.values(i, j) == Approx(1.0 - testing::pearson_definition(ri, rj)).epsilon(1e-12));
      }
    }
  }
  x.row(1) = x.row(0);
  x.row(2) = -x.row(0);
  Index constant = -1;
  x.row(3).setConstant(2.0);
  const RDM r2 = compute_rdm(x, {}, &constant);
  CHECK(r2.values(0, 1) == Approx(0.0).epsilon(1e-14));
  CHECK(r2.values(0, 2) == Approx(2.0).epsilon(1e-14));
  CHECK(r2.values(3, 0) == 1.0);
  CHECK(constant == 1);
  CHECK_THROWS_AS(compute_rdm(Matrix(rng.normal_matrix(4, 1)), {}), Error);
}

TEST_CASE("RSA of an RDM with itself is 1 and random RDMs score near 0") {
  Rng rng(10);
  std::vector<std::string> ids;
  for (int i = 0; i < 20; ++i) ids.push_back("s" + std::to_string(i));
  const RDM a = compute_rdm(rng.normal_matrix(20, 6), ids);
  CHECK(*rsa_score(a, a) == Approx(1.0).epsilon(1e-14));
  CHECK(*rsa_score(a, a, RankMethod::Kendall) == 1.0);
  int small = 0;
  for (int seed = 0; seed < 200; ++seed) {
    Rng r(derive_seed(99, static_cast<std::uint64_t>(seed)));
    const RDM p = compute_rdm(r.normal_matrix(20, 6), ids);
    const RDM q = compute_rdm(r.normal_matrix(20, 6), ids);
    small += std::abs(*rsa_score(p, q)) < 0.2;
  }
  CHECK(small >= 190);
}

TEST_CASE("RSA refuses misaligned stimulus ids") {
  Rng rng(2);
  const RDM a = compute_rdm(rng.normal_matrix(4, 3), {"a", "b", "c", "d"});
  const RDM b = compute_rdm(rng.normal_matrix(4, 3), {"a", "b", "d", "c"});
  try {
    rsa_score(a, b);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Alignment);
  }
}

TEST_CASE("metrics work for float scalars") {
  Eigen::VectorXf x(4), y(4);
  x << 1, 2, 3, 4;
  y << 1, 3, 2, 4;
  CHECK(*pearson(x, y) == Approx(0.8).epsilon(1e-6));
  Eigen::MatrixXf a = Eigen::MatrixXf::Random(6, 3);
  CHECK(*linear_cka(a, a) == Approx(1.0).epsilon(1e-5));
}
