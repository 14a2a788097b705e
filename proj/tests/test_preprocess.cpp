#include "brainalign/preprocess.hpp"
#include "brainalign/rng.hpp"
#include "brainalign/synth.hpp"
#include "doctest.h"

using namespace brainalign;
using doctest::Approx;

namespace {

// 2 channels, sfreq 100, epoch [t0, t1), given trial data.
EEGEpochs make_epochs(Index trials, Index channels, double t0, double t1, double sfreq = 100.0) {
  EEGEpochs e;
  e.sfreq = sfreq;
  e.t_start_ms = t0;
  e.t_end_ms = t1;
  e.n_channels = channels;
  e.n_times = static_cast<Index>(std::llround((t1 - t0) / 1000.0 * sfreq));
  e.data = RowMatrix::Zero(trials, channels * e.n_times);
  for (Index c = 0; c < channels; ++c) e.channel_names.push_back("C" + std::to_string(c));
  for (Index i = 0; i < trials; ++i) {
    e.stimulus_ids.push_back("s" + std::to_string(i));
    e.repetition_index.push_back(0);
  }
  return e;
}

}  // namespace

TEST_CASE("column [1,2,3] standardises to mean 0, std 1") {
  Matrix x(3, 1);
  x << 1, 2, 3;
  const auto s = standardize_fit(x);
  const Matrix z = standardize_apply(s, x);
  CHECK(z.mean() == Approx(0.0).epsilon(1e-15));
  CHECK(std::sqrt(z.array().square().mean()) == Approx(1.0).epsilon(1e-14));
  CHECK((standardize_invert(s, z) - x).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("constant column maps to zeros") {
  Matrix x(4, 2);
  x << 0.1, 1, 0.1, 2, 0.1, 3, 0.1, 4;
  const auto s = standardize_fit(x);
  CHECK(s.degenerate(0));
  CHECK_FALSE(s.degenerate(1));
  CHECK(standardize_apply(s, x).col(0).isZero(0.0));
}

TEST_CASE("train-fitted state on held-out data leaves a nonzero but bounded mean") {
  Rng rng(5);
  const Matrix x = rng.normal_matrix(200, 4);
  const auto s = standardize_fit(x.topRows(100));
  const Matrix z = standardize_apply(s, x.bottomRows(100));
  const double m = std::abs(z.colwise().mean().mean());
  CHECK(m > 0.0);
  CHECK(m < 0.5);
}

TEST_CASE("PCA of rank-2 data in R5 explains all variance with two components") {
  Rng rng(3);
  const Matrix x = rng.normal_matrix(30, 2) * rng.normal_matrix(2, 5);
  const auto p = pca_fit(x, 2);
  CHECK(p.explained_variance_ratio.sum() == Approx(1.0).epsilon(1e-10));
}

TEST_CASE("PCA with k = d reconstructs the data") {
  Rng rng(4);
  const Matrix x = rng.normal_matrix(20, 6);
  const auto p = pca_fit(x, 6);
  CHECK((pca_inverse(p, pca_transform(p, x)) - x).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((p.components.transpose() * p.components - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("PCA variance ratios match a dense covariance eigendecomposition") {
  Rng rng(6);
  const Matrix x = rng.normal_matrix(100, 50) * rng.normal_matrix(50, 50);
  const auto p = pca_fit(x, 10);
  const Matrix c = x.rowwise() - x.colwise().mean();
  const Matrix cov = c.transpose() * c / 99.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const Vector ev = eig.eigenvalues().reverse();
  const double total = ev.sum();
  for (Index i = 0; i < 10; ++i) {
    CHECK(p.explained_variance_ratio(i) == Approx(ev(i) / total).epsilon(1e-8));
    // Same direction up to sign.
    const Vector v = eig.eigenvectors().col(49 - i);
    CHECK(std::abs(v.dot(p.components.col(i))) == Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("PCA rejects k outside [1, min(n-1, d)]") {
  Rng rng(1);
  const Matrix x = rng.normal_matrix(5, 8);
  CHECK_THROWS_AS(pca_fit(x, 0), Error);
  CHECK_THROWS_AS(pca_fit(x, 5), Error);
  CHECK_NOTHROW(pca_fit(x, 4));
  CHECK(clamp_pca_components(256, 5, 8) == 4);
  CHECK(clamp_pca_components(3, 50, 8) == 3);
}

TEST_CASE("averaging repetitions") {
  EEGEpochs e = make_epochs(4, 1, 0, 30);
  for (Index i = 0; i < 4; ++i) {
    e.stimulus_ids[static_cast<std::size_t>(i)] = "a";
    e.repetition_index[static_cast<std::size_t>(i)] = static_cast<int>(i);
    e.data.row(i) << 1, 2, 3;
  }
  EEGEpochs avg = average_repetitions(e);
  CHECK(avg.n_trials() == 1);
  CHECK(avg.data.row(0) == e.data.row(0));

  EEGEpochs two = make_epochs(4, 1, 0, 30);
  two.stimulus_ids = {"x", "y", "x", "y"};
  two.data.row(0).setConstant(1);
  two.data.row(2).setConstant(3);
  two.data.row(1).setConstant(5);
  two.data.row(3).setConstant(5);
  avg = average_repetitions(two);
  CHECK(avg.stimulus_ids == std::vector<std::string>{"x", "y"});
  CHECK((avg.data.row(0).array() == 2.0).all());
  CHECK((avg.data.row(1).array() == 5.0).all());
}

TEST_CASE("synth epochs average to one trial per stimulus") {
  SynthSpec spec;
  spec.n_stimuli = 30;
  spec.n_repetitions = 4;
  const auto ds = gen_structured_epochs(spec);
  CHECK(ds.epochs.n_trials() == 120);
  CHECK(average_repetitions(ds.epochs).n_trials() == 30);
}

TEST_CASE("baseline correction") {
  EEGEpochs e = make_epochs(2, 2, -200, 300);
  e.data.setConstant(4.0);
  CHECK(baseline_correct(e, -200, 0).data.isZero(0.0));

  EEGEpochs step = make_epochs(1, 1, -200, 300);
  for (Index t = 0; t < step.n_times; ++t) step.data(0, t) = step.time_ms(t) < 0 ? 0.0 : 5.0;
  CHECK(baseline_correct(step, -200, 0).data == step.data);

  EEGEpochs onset = make_epochs(1, 1, 0, 1000);
  try {
    baseline_correct(onset, -200, 0);
    FAIL("expected error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::Range);
  }
}

TEST_CASE("window flattening layout and lengths") {
  EEGEpochs e = make_epochs(1, 2, 0, 50);
  for (Index c = 0; c < 2; ++c)
    for (Index t = 0; t < 5; ++t) e.data(0, c * 5 + t) = 10 * c + t;
  const Matrix w = window_flatten(e, 10, 40);
  REQUIRE(w.cols() == 6);
  const std::vector<double> expected{1, 2, 3, 11, 12, 13};
  for (Index j = 0; j < 6; ++j) CHECK(w(0, j) == expected[static_cast<std::size_t>(j)]);
  CHECK(window_flatten(e, 0, 50).cols() == 10);

  EEGEpochs s = make_epochs(3, 4, 0, 500);
  CHECK(window_samples(s, 100, 200).second - window_samples(s, 100, 200).first == 10);
  CHECK_THROWS_AS(window_samples(s, 400, 600), Error);
  CHECK_THROWS_AS(window_samples(s, 100, 100), Error);

  const Matrix means = window_channel_means(e, 10, 40);
  CHECK(means(0, 0) == Approx(2.0));
  CHECK(means(0, 1) == Approx(12.0));
}

TEST_CASE("window tiling drops a partial final window") {
  EEGEpochs e = make_epochs(1, 1, -200, 500);
  const auto w = tile_windows(e, 100);
  REQUIRE(w.size() == 5);
  CHECK(w.front() == std::pair{0.0, 100.0});
  CHECK(w.back() == std::pair{400.0, 500.0});
  CHECK(tile_windows(e, 150).size() == 3);
}
