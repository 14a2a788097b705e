#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "brainalign/core.hpp"

namespace brainalign {

// Correlations return std::nullopt when undefined (a constant input, or all
// pairs tied for Kendall). Callers decide whether that means 0.

template <typename DerivedX, typename DerivedY>
std::optional<typename DerivedX::Scalar> pearson(const Eigen::MatrixBase<DerivedX>& x,
                                                 const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  if (x.size() != y.size()) throw parameter_error("pearson: length mismatch");
  if (x.size() < 2) throw parameter_error("pearson: need at least 2 observations");
  const auto n = static_cast<Scalar>(x.size());
  const Scalar mx = x.sum() / n;
  const Scalar my = y.sum() / n;
  Scalar sxy = 0, sxx = 0, syy = 0;
  for (Index i = 0; i < x.size(); ++i) {
    const Scalar dx = x.coeff(i) - mx;
    const Scalar dy = y.coeff(i) - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0) || !(syy > 0)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), Scalar(-1), Scalar(1));
}

/// Fractional (mid) ranks, 1-based: ties share the mean of the positions
/// they occupy.
template <typename Derived>
VectorX<double> midranks(const Eigen::MatrixBase<Derived>& x) {
  const Index n = x.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return x.coeff(a) < x.coeff(b); });
  VectorX<double> ranks(n);
  for (Index i = 0; i < n;) {
    Index j = i + 1;
    while (j < n && x.coeff(order[static_cast<std::size_t>(j)]) == x.coeff(order[static_cast<std::size_t>(i)])) ++j;
    const double r = static_cast<double>(i + j + 1) / 2.0;
    for (Index k = i; k < j; ++k) ranks(order[static_cast<std::size_t>(k)]) = r;
    i = j;
  }
  return ranks;
}

template <typename DerivedX, typename DerivedY>
std::optional<double> spearman(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  if (x.size() != y.size()) throw parameter_error("spearman: length mismatch");
  return pearson(midranks(x), midranks(y));
}

/// Exact pair counts behind tau-b. `concordant_minus_discordant` is C - D;
/// `pairs_untied_x` is C + D + (pairs tied only in y), `pairs_untied_y`
/// likewise, i.e. the two factors under the square root.
struct KendallCounts {
  std::int64_t concordant_minus_discordant = 0;
  std::int64_t pairs_untied_x = 0;
  std::int64_t pairs_untied_y = 0;
};

inline std::optional<double> tau_b(const KendallCounts& c) {
  if (c.pairs_untied_x == 0 || c.pairs_untied_y == 0) return std::nullopt;
  return static_cast<double>(c.concordant_minus_discordant) /
         std::sqrt(static_cast<double>(c.pairs_untied_x) * static_cast<double>(c.pairs_untied_y));
}

namespace detail {

inline std::int64_t tie_pairs(std::int64_t run) { return run * (run - 1) / 2; }

// Bottom-up merge sort on `v`, returning the number of inversions.
inline std::int64_t count_inversions(std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<double> buf(n);
  std::int64_t swaps = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n), hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[j] < v[i]) {
          swaps += static_cast<std::int64_t>(mid - i);
          buf[k++] = v[j++];
        } else {
          buf[k++] = v[i++];
        }
      }
      while (i < mid) buf[k++] = v[i++];
      while (j < hi) buf[k++] = v[j++];
    }
    v.swap(buf);
  }
  return swaps;
}

}  // namespace detail

/// Knight's O(n log n) tie-aware pair counting.
template <typename DerivedX, typename DerivedY>
KendallCounts kendall_counts(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  if (x.size() != y.size()) throw parameter_error("kendall_tau: length mismatch");
  const Index n = x.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return x.coeff(a) < x.coeff(b) || (x.coeff(a) == x.coeff(b) && y.coeff(a) < y.coeff(b));
  });
  std::vector<double> xs(static_cast<std::size_t>(n)), ys(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) {
    xs[i] = static_cast<double>(x.coeff(order[i]));
    ys[i] = static_cast<double>(y.coeff(order[i]));
  }
  const std::int64_t total = detail::tie_pairs(n);
  std::int64_t tied_x = 0, tied_xy = 0;
  for (std::size_t i = 0; i < xs.size();) {
    std::size_t j = i + 1;
    while (j < xs.size() && xs[j] == xs[i]) ++j;
    tied_x += detail::tie_pairs(static_cast<std::int64_t>(j - i));
    for (std::size_t a = i; a < j;) {
      std::size_t b = a + 1;
      while (b < j && ys[b] == ys[a]) ++b;
      tied_xy += detail::tie_pairs(static_cast<std::int64_t>(b - a));
      a = b;
    }
    i = j;
  }
  const std::int64_t swaps = detail::count_inversions(ys);
  std::int64_t tied_y = 0;
  for (std::size_t i = 0; i < ys.size();) {
    std::size_t j = i + 1;
    while (j < ys.size() && ys[j] == ys[i]) ++j;
    tied_y += detail::tie_pairs(static_cast<std::int64_t>(j - i));
    i = j;
  }
  KendallCounts c;
  c.concordant_minus_discordant = total - tied_x - tied_y + tied_xy - 2 * swaps;
  c.pairs_untied_x = total - tied_x;
  c.pairs_untied_y = total - tied_y;
  return c;
}

/// Kendall tau-b: (C - D) / sqrt((C + D + T_x)(C + D + T_y)).
template <typename DerivedX, typename DerivedY>
std::optional<double> kendall_tau(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  if (x.size() < 2) throw parameter_error("kendall_tau: need at least 2 observations");
  return tau_b(kendall_counts(x, y));
}

/// Linear CKA: <Kc, Lc>_F / (|Kc|_F |Lc|_F) with K = A Aᵀ, L = B Bᵀ and Kc,
/// Lc double-centred. Double-centring a linear Gram matrix equals the Gram
/// matrix of column-centred data, which is what is formed here; the
/// feature-space identity <Kc, Lc> = |Acᵀ Bc|²_F is used when n exceeds both
/// feature counts.
template <typename DerivedA, typename DerivedB>
std::optional<typename DerivedA::Scalar> linear_cka(const Eigen::MatrixBase<DerivedA>& a,
                                                    const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.rows() != b.rows()) throw parameter_error("linear_cka: row count mismatch");
  if (a.rows() < 3) throw parameter_error("linear_cka: need at least 3 rows");
  const MatrixX<Scalar> ac = a.rowwise() - a.colwise().mean();
  const MatrixX<Scalar> bc = b.rowwise() - b.colwise().mean();
  Scalar cross, norm_a, norm_b;
  if (a.rows() <= std::max(a.cols(), b.cols())) {
    const MatrixX<Scalar> kc = ac * ac.transpose();
    const MatrixX<Scalar> lc = bc * bc.transpose();
    cross = (kc.array() * lc.array()).sum();
    norm_a = kc.norm();
    norm_b = lc.norm();
  } else {
    cross = (ac.transpose() * bc).squaredNorm();
    norm_a = (ac.transpose() * ac).norm();
    norm_b = (bc.transpose() * bc).norm();
  }
  if (!(norm_a > 0) || !(norm_b > 0)) return std::nullopt;
  return std::clamp(cross / (norm_a * norm_b), Scalar(0), Scalar(1));
}

// ---------------------------------------------------------------------------
// Representational dissimilarity

struct RDM {
  Matrix values;  // n × n, symmetric, zero diagonal, entries in [0, 2]
  std::vector<std::string> stimulus_ids;

  Index size() const noexcept { return values.rows(); }
  /// Strict upper triangle, row by row.
  Vector upper_triangle() const {
    const Index n = size();
    Vector v(n * (n - 1) / 2);
    Index k = 0;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) v(k++) = values(i, j);
    return v;
  }
};

/// Entry (i, j) = 1 - pearson(row i, row j). A constant row is dissimilar
/// (1) to everything but itself. Returns the number of constant rows via
/// `constant_rows` when given.
template <typename Derived>
RDM compute_rdm(const Eigen::MatrixBase<Derived>& x, std::vector<std::string> ids, Index* constant_rows = nullptr) {
  const Index n = x.rows();
  if (n < 2) throw parameter_error("compute_rdm: need at least 2 rows");
  if (x.cols() < 2) throw parameter_error("compute_rdm: need at least 2 columns for a correlation across features");
  if (!ids.empty() && static_cast<Index>(ids.size()) != n) throw parameter_error("compute_rdm: id count mismatch");
  Matrix z = x.template cast<double>();
  z = z.colwise() - z.rowwise().mean();
  std::vector<bool> constant(static_cast<std::size_t>(n), false);
  Index n_constant = 0;
  for (Index i = 0; i < n; ++i) {
    const double norm = z.row(i).norm();
    if (norm > 0) {
      z.row(i) /= norm;
    } else {
      constant[static_cast<std::size_t>(i)] = true;
      ++n_constant;
    }
  }
  const Matrix corr = z * z.transpose();
  RDM rdm;
  rdm.values = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const bool undefined = constant[static_cast<std::size_t>(i)] || constant[static_cast<std::size_t>(j)];
      const double d = undefined ? 1.0 : std::clamp(1.0 - corr(i, j), 0.0, 2.0);
      rdm.values(i, j) = d;
      rdm.values(j, i) = d;
    }
  }
  rdm.stimulus_ids = std::move(ids);
  if (constant_rows) *constant_rows = n_constant;
  return rdm;
}

enum class RankMethod { Spearman, Kendall };

/// Rank correlation of the two strict upper triangles.
inline std::optional<double> rsa_score(const RDM& a, const RDM& b, RankMethod method = RankMethod::Spearman) {
  if (a.size() != b.size() || a.stimulus_ids != b.stimulus_ids)
    throw Error(ErrorKind::Alignment, "ID_MISMATCH", "rsa_score: RDMs are not over the same ordered stimuli");
  const Vector ua = a.upper_triangle();
  const Vector ub = b.upper_triangle();
  return method == RankMethod::Spearman ? spearman(ua, ub) : kendall_tau(ua, ub);
}

}  // namespace brainalign
