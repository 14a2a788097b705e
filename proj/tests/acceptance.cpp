// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "brainalign/analyses.hpp"
#include "brainalign/encoder.hpp"
#include "brainalign/log.hpp"
#include "brainalign/metrics.hpp"
#include "brainalign/npy.hpp"
#include "brainalign/preprocess.hpp"
#include "brainalign/ridge.hpp"
#include "brainalign/rng.hpp"
#include "brainalign/stats.hpp"
#include "brainalign/synth.hpp"
#include "json.hpp"
#include "npy_corpus.hpp"
#include "oracles.hpp"

using namespace brainalign;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  double budget_s = 0.0;  // 0: no runtime bound
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (o.budget_s > 0 && secs > o.budget_s) {
    o.pass = false;
    o.detail += "; over the " + std::to_string(static_cast<int>(o.budget_s)) + " s budget";
  }
  if (!o.pass) ++failures;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f s", secs);
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << " | " << o.detail << " | " << buf << std::endl;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome ridge_correctness() {
  Rng rng(101);
  double worst_oracle = 0, worst_paths = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.below(19));  // 2..20
    const Index d = 1 + static_cast<Index>(rng.below(8));   // 1..8
    const Index m = 1 + static_cast<Index>(rng.below(3));
    const double alpha = std::pow(10.0, -2.0 + 4.0 * rng.uniform());
    const Matrix x = rng.normal_matrix(n, d), y = rng.normal_matrix(n, m);
    for (bool center : {true, false}) {
      const auto oracle = testing::normal_equations_ridge(x, y, alpha, center);
      const auto primal = ridge_solve(x, y, alpha, {center, RidgePath::Primal});
      const auto dual = ridge_solve(x, y, alpha, {center, RidgePath::Dual});
      const auto autop = ridge_solve(x, y, alpha, {center, RidgePath::Auto});
      worst_oracle = std::max({worst_oracle, testing::relative_error(autop.beta, oracle.beta),
                               testing::relative_error(primal.beta, oracle.beta)});
      if (center)
        worst_oracle = std::max(worst_oracle, testing::relative_error(autop.intercept, oracle.intercept));
      worst_paths = std::max(worst_paths, testing::relative_error(dual.beta, primal.beta));
    }
  }
  return {worst_oracle <= 1e-10 && worst_paths <= 1e-8,
          fmt("max rel err vs normal equations %.2e (tol 1e-10), primal/dual %.2e (tol 1e-8)", worst_oracle,
              worst_paths),
          5.0};
}

bool same(const std::optional<double>& a, const std::optional<double>& b) {
  return a.has_value() == b.has_value() && (!a || *a == *b);
}

Outcome metric_oracles() {
  int rank_mismatch = 0, rank_cases = 0;
  std::array<double, 7> base{1, 2, 3, 4, 5, 6, 7};
  std::array<int, 7> perm{0, 1, 2, 3, 4, 5, 6};
  Vector x(7), y(7);
  for (int i = 0; i < 7; ++i) x(i) = base[i];
  do {
    for (int i = 0; i < 7; ++i) y(i) = perm[i];
    const auto [rho, tau] = rank_oracle(x, y);
    rank_mismatch += !same(spearman(x, y), rho) || !same(kendall_tau(x, y), tau);
    ++rank_cases;
  } while (std::next_permutation(perm.begin(), perm.end()));

  Rng rng(202);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.below(11));  // 2..12
    const auto levels = 1 + rng.below(4);
    Vector a(n), b(n);
    for (Index i = 0; i < n; ++i) {
      a(i) = static_cast<double>(rng.below(levels + 1));
      b(i) = static_cast<double>(rng.below(levels + 2)) * 0.5;
    }
    const auto [rho, tau] = rank_oracle(a, b);
    rank_mismatch += !same(spearman(a, b), rho) || !same(kendall_tau(a, b), tau);
    ++rank_cases;
  }

  double worst_cka = 0, worst_self = 0, worst_inv = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 5 + static_cast<Index>(rng.below(26));
    const Matrix a = rng.normal_matrix(n, 1 + static_cast<Index>(rng.below(10)));
    const Matrix b = rng.normal_matrix(n, 1 + static_cast<Index>(rng.below(10)));
    worst_cka = std::max(worst_cka, std::abs(*linear_cka(a, b) - testing::naive_cka(a, b)));
    worst_self = std::max(worst_self, std::abs(*linear_cka(a, a) - 1.0));
    const Matrix q = Eigen::HouseholderQR<Matrix>(rng.normal_matrix(a.cols(), a.cols())).householderQ();
    const double base_cka = *linear_cka(a, b);
    worst_inv = std::max({worst_inv, std::abs(*linear_cka(Matrix(a * q), b) - base_cka),
                          std::abs(*linear_cka(Matrix(a * 37.5), b) - base_cka)});
  }
  const bool ok = rank_mismatch == 0 && worst_cka <= 1e-12 && worst_self <= 1e-10 && worst_inv <= 1e-8;
  std::ostringstream os;
  os << rank_mismatch << "/" << rank_cases << " rank mismatches; "
     << fmt("CKA vs naive %.2e (tol 1e-12), self %.2e (tol 1e-10), invariance %.2e (tol 1e-8)", worst_cka,
            worst_self, worst_inv);
  return {ok, os.str(), 30.0};
}

Outcome snr_law() {
  CVConfig cfg;
  double sum = 0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    // One target column: with several, the default target PCA scores mixtures
    // whose per-component snr differs from the per-column snr.
    const auto ds = gen_linear_dataset(500, 8, 1, 1.0, derive_seed(303, static_cast<std::uint64_t>(s)));
    cfg.rng_seed = static_cast<std::uint64_t>(s);
    sum += cv_encode(ds.x, ds.y, cfg).score.rho;
  }
  const double mean = sum / seeds, target = std::sqrt(0.5);
  return {std::abs(mean - target) <= 0.03, fmt("mean rho %.4f vs %.4f (tol 0.03)", mean, target), 60.0};
}

Outcome null_calibration() {
  CVConfig cfg;
  const int repeats = 200, n_perm = 200;
  int rejections = 0;
  double score_sum = 0;
  for (int r = 0; r < repeats; ++r) {
    Rng rng(derive_seed(404, static_cast<std::uint64_t>(r)));
    const Matrix x = rng.normal_matrix(200, 8), y = rng.normal_matrix(200, 4);
    cfg.rng_seed = static_cast<std::uint64_t>(r);
    const auto observed = cv_encode(x, y, cfg);
    const auto null = permutation_null(x, y, cfg, n_perm, derive_seed(405, static_cast<std::uint64_t>(r)));
    const auto sig = significance_test(observed.score.fold_scores, null);
    rejections += sig.empirical_p <= 0.05;
    score_sum += observed.score.rho;
  }
  const double rate = static_cast<double>(rejections) / repeats, mean = score_sum / repeats;
  return {rate >= 0.01 && rate <= 0.10 && std::abs(mean) < 0.01,
          fmt("rejection rate %.3f (need [0.01, 0.10]), mean score %.4f (need |.| < 0.01)", rate, mean), 600.0};
}

Outcome planted_recovery() {
  const int seeds = 40;
  int layer_hits = 0, topo_hits = 0;
  for (int s = 0; s < seeds; ++s) {
    SynthSpec spec;
    spec.snr = 2.0;
    spec.seed = derive_seed(505, static_cast<std::uint64_t>(s));
    const auto data = gen_structured_epochs(spec);
    Dataset ds;
    ds.subjects.push_back({"sub-01", data.epochs});
    ds.features.push_back(data.features);
    ds.montage = data.montage;

    AnalysisConfig cfg;
    cfg.n_perm = 0;
    cfg.cv.rng_seed = static_cast<std::uint64_t>(s);
    const auto grid = run_layer_time(ds, spec.model_id, cfg);
    const auto [l, w] = grid.argmax;
    layer_hits += l == spec.planted_layer && grid.windows[static_cast<std::size_t>(w)] == spec.planted_window;

    cfg.layer = LayerSelector::at(spec.planted_layer);
    const auto windows = tile_windows(data.epochs, cfg.window_ms);
    const auto topo = run_topo(ds, spec.model_id, windows, cfg);
    topo_hits += topo.ranking().front() == spec.planted_region;
  }
  const bool ok = layer_hits >= 38 && topo_hits >= 38;  // 95% of 40
  return {ok,
          std::to_string(layer_hits) + "/40 layer-time argmax correct, " + std::to_string(topo_hits) +
              "/40 planted region ranked first (need >= 38 each)",
          600.0};
}

// ---------------------------------------------------------------------------

int sh(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Largest relative difference between numbers at matching JSON positions;
// structural differences count as infinite.
double json_rel_diff(const nlohmann::json& a, const nlohmann::json& b) {
  if (a.type() != b.type()) {
    if (a.is_number() && b.is_number()) return json_rel_diff(nlohmann::json(a.get<double>()), nlohmann::json(b.get<double>()));
    return INFINITY;
  }
  if (a.is_number_float()) {
    const double x = a.get<double>(), y = b.get<double>();
    if (x == y) return 0;
    return std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-300});
  }
  if (a.is_array() || a.is_object()) {
    if (a.size() != b.size()) return INFINITY;
    double worst = 0;
    for (auto it = a.begin(); it != a.end(); ++it) {
      const auto& other = a.is_array() ? b.at(static_cast<std::size_t>(std::distance(a.begin(), it)))
                                       : (b.contains(it.key()) ? b.at(it.key()) : nlohmann::json());
      if (a.is_object() && !b.contains(it.key())) return INFINITY;
      worst = std::max(worst, json_rel_diff(*it, other));
    }
    return worst;
  }
  return a == b ? 0 : INFINITY;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "brainalign_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = "\"" BRAINALIGN_CLI_PATH "\"";
  if (sh(cli + " synth --n-subjects 2 --seed 11 --out " + (root / "data").string() + " > /dev/null") != 0)
    return {false, "synth failed"};
  const std::string manifest = (root / "data" / "manifest.json").string();
  const std::vector<std::pair<std::string, std::string>> commands{
      {"alignment", "align --n-perm 20 --layer 2"},
      {"layer_time", "layer-time"},
      {"topo", "topo --layer 2"},
      {"category", "category --categories " + (root / "cats.csv").string()},
  };
  {
    std::ofstream cats(root / "cats.csv");
    cats << "stimulus_id,category\n";
    for (int s = 0; s < 120; ++s) {
      char id[32];
      std::snprintf(id, sizeof id, "stim-%05d", s);
      cats << id << ',' << (s % 3 == 0 ? "a" : "b") << '\n';
    }
  }
  int identical = 0, total = 0;
  double worst = 0;
  for (const auto& [name, args] : commands) {
    for (const char* run : {"j1a", "j1b", "j4"}) {
      const std::string jobs = std::string(run) == "j4" ? "4" : "1";
      if (sh(cli + " " + args + " -q --manifest " + manifest + " --jobs " + jobs + " --out " +
             (root / run).string() + " > /dev/null 2>&1") != 0)
        return {false, name + " run failed"};
    }
    const std::string file = name + "_synth-model.json";
    const std::string a = slurp(root / "j1a" / file), b = slurp(root / "j1b" / file);
    ++total;
    identical += !a.empty() && a == b;
    auto ja = nlohmann::json::parse(a), j4 = nlohmann::json::parse(slurp(root / "j4" / file));
    for (auto* j : {&ja, &j4})
      if (j->contains("config")) (*j)["config"].erase("jobs");
    worst = std::max(worst, json_rel_diff(ja, j4));
  }
  fs::remove_all(root);
  return {identical == total && worst <= 1e-10,
          std::to_string(identical) + "/" + std::to_string(total) +
              " outputs bitwise identical at --jobs 1; " + fmt("--jobs 4 max rel diff %.2e (tol 1e-10)", worst)};
}

Outcome ols_checks() {
  Rng rng(707);
  std::vector<double> x(25), y(25);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.normal();
    y[i] = -1.25 + 2.5 * x[i];
  }
  const auto exact = ols_fit(x, y);
  const double slope_err = std::abs(exact.slope - 2.5), r2_err = std::abs(exact.r_squared - 1.0);
  double worst = 0;
  for (int set = 0; set < 100; ++set) {
    const std::size_t n = 3 + rng.below(60);
    Vector vx(static_cast<Index>(n)), vy(static_cast<Index>(n));
    const double b = rng.normal();
    for (Index i = 0; i < vx.size(); ++i) {
      vx(i) = rng.normal();
      vy(i) = b * vx(i) + rng.normal();
    }
    const auto fit = ols_fit(std::span<const double>(vx.data(), n), std::span<const double>(vy.data(), n));
    const double r = *pearson(vx, vy);
    worst = std::max(worst, std::abs(fit.r_squared - r * r));
  }
  return {slope_err <= 1e-12 && r2_err <= 1e-12 && worst <= 1e-12,
          fmt("exact line slope err %.2e, |R2 - 1| %.2e; max |R2 - r^2| %.2e (tol 1e-12)", slope_err, r2_err, worst)};
}

Outcome format_checks() {
  Rng rng(808);
  int stable = 0, trips = 0;
  const fs::path dir = fs::temp_directory_path() / "brainalign_acceptance_npy";
  fs::create_directories(dir);
  for (int t = 0; t < 20; ++t) {
    const Matrix m = rng.normal_matrix(1 + static_cast<Index>(rng.below(30)), 1 + static_cast<Index>(rng.below(30)));
    for (NpyDtype dt : {NpyDtype::F4, NpyDtype::F8}) {
      const NpyArray a = to_npy(m, dt);
      const std::string bytes = encode_npy(a.values, a.shape, dt);
      save_npy(a, dir / "a.npy", dt);
      const NpyArray back = load_npy(dir / "a.npy");
      const std::string again = encode_npy(back.values, back.shape, back.dtype);
      ++trips;
      stable += again == bytes && slurp(dir / "a.npy") == bytes && back.values == a.values && back.dtype == dt;
    }
  }
  fs::remove_all(dir);

  int corpus_ok = 0;
  std::string misses;
  const auto corpus = testing::corrupt_npy_corpus();
  for (const auto& c : corpus) {
    try {
      parse_npy(std::span<const char>(c.bytes.data(), c.bytes.size()));
      misses += " " + c.name + "(accepted)";
    } catch (const Error& e) {
      if (e.code() == c.code && e.kind() == c.kind) ++corpus_ok;
      else misses += " " + c.name + "(" + e.code() + ")";
    } catch (const std::exception& e) {
      misses += " " + c.name + "(foreign exception)";
    }
  }
  const bool ok = stable == trips && corpus_ok == static_cast<int>(corpus.size()) && corpus.size() == 10;
  return {ok, std::to_string(stable) + "/" + std::to_string(trips) + " round trips bitwise stable; " +
                  std::to_string(corpus_ok) + "/" + std::to_string(corpus.size()) + " corrupt cases with the designated code" +
                  misses};
}

}  // namespace

int main() {
  log::set_level(log::Level::Quiet);
  criterion("ridge correctness", ridge_correctness);
  criterion("metric oracles", metric_oracles);
  criterion("snr law", snr_law);
  criterion("null calibration", null_calibration);
  criterion("planted-structure recovery", planted_recovery);
  criterion("determinism", determinism);
  criterion("ols", ols_checks);
  criterion("format", format_checks);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
