#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "brainalign/core.hpp"
#include "brainalign/dataset.hpp"
#include "brainalign/encoder.hpp"
#include "brainalign/metrics.hpp"
#include "brainalign/stats.hpp"

namespace brainalign {

/// Which layer(s) of a FeatureTensor feed the encoder.
struct LayerSelector {
  enum class Kind { Final, Index, All } kind = Kind::Final;
  Index index = 0;

  static LayerSelector final_layer() { return {}; }
  static LayerSelector at(Index i) { return {Kind::Index, i}; }
  static LayerSelector all() { return {Kind::All, 0}; }
  static LayerSelector parse(const std::string& text);  // "final", "all" or an integer
  std::string to_string() const;
};

/// Whether Spearman/CKA/RSA use out-of-fold predictions pooled over all
/// stimuli or are averaged over per-fold held-out sets.
enum class MetricPooling { Pooled, PerFold };

enum class CategoryMode { GlobalFit, Refit };

struct AnalysisConfig {
  CVConfig cv;
  LayerSelector layer;
  int n_perm = 200;  // 0 skips significance testing
  std::uint64_t perm_seed = 0;
  std::optional<std::pair<double, double>> baseline_ms;
  MetricPooling pooling = MetricPooling::Pooled;
  double window_ms = 100.0;
  Index category_min_n = 5;
  CategoryMode category_mode = CategoryMode::GlobalFit;
  int jobs = 1;
};

// ---------------------------------------------------------------------------
// Alignment battery

inline constexpr const char* kMetricNames[] = {"pearson", "spearman", "cka", "rsa", "kendall"};

struct SubjectAlignment {
  std::string subject_id;
  Index n_stimuli = 0;
  /// pearson = cross-validated ρ (mean fold score); the others are computed
  /// on out-of-fold predictions. nullopt marks an undefined value.
  std::map<std::string, std::optional<double>> metrics;
  double pearson_pooled = 0.0;
  std::vector<double> fold_scores;
  std::vector<double> fold_alphas;
  Index undefined_columns = 0;
  std::optional<SignificanceResult> significance;
  std::optional<double> null_mean, null_std;
};

struct MetricAggregate {
  std::optional<double> mean;
  std::optional<double> std;
  std::size_t n_defined = 0;
  std::size_t n_undefined = 0;
};

struct AlignmentReport {
  std::string model_id;
  std::string layer;  // layer name(s) used
  std::vector<SubjectAlignment> subjects;
  std::map<std::string, MetricAggregate> aggregate;
  AnalysisConfig config;
  std::pair<double, double> response_window_ms{0.0, 0.0};
};

AlignmentReport run_alignment(const Dataset& dataset, const std::string& model_id, const AnalysisConfig& cfg);

/// Recomputes `aggregate` from the per-subject values.
std::map<std::string, MetricAggregate> aggregate_metrics(const std::vector<SubjectAlignment>& subjects);

// ---------------------------------------------------------------------------
// Layer × time

struct LayerTimeResult {
  std::string model_id;
  std::vector<std::string> layer_names;
  std::vector<std::pair<double, double>> windows;
  std::vector<std::string> subject_ids;
  std::vector<Matrix> subject_grids;
  Matrix mean_grid;
  std::pair<Index, Index> argmax{0, 0};
  AnalysisConfig config;
};

LayerTimeResult run_layer_time(const Dataset& dataset, const std::string& model_id, const AnalysisConfig& cfg);

// ---------------------------------------------------------------------------
// Topography

struct RegionStats {
  Region region = Region::Other;
  std::vector<std::string> channels;
  double mean = 0.0;  // over every (channel, window) cell of the region
  double std = 0.0;   // sample std over the same cells (0 for a single cell)
  std::vector<double> window_mean;
  std::vector<double> window_std;
};

struct TopoResult {
  std::string model_id;
  std::vector<std::string> channel_names;
  std::vector<Region> channel_regions;
  std::vector<std::pair<double, double>> windows;
  Matrix r;  // channels × windows, subject mean
  std::vector<std::string> subject_ids;
  std::vector<Matrix> subject_r;
  std::vector<RegionStats> regions;  // Frontal, Central, Parietal, Occipital, then Other if present
  Montage montage;
  AnalysisConfig config;

  /// Regions ordered by descending mean (scored regions only).
  std::vector<Region> ranking() const;
};

std::vector<RegionStats> region_stats(const Matrix& r, const std::vector<std::string>& channels,
                                      const std::vector<Region>& regions);

TopoResult run_topo(const Dataset& dataset, const std::string& model_id,
                    const std::vector<std::pair<double, double>>& windows, const AnalysisConfig& cfg,
                    const Montage* montage_override = nullptr);

// ---------------------------------------------------------------------------
// Categories

struct CategoryScore {
  std::string category;
  Index n = 0;
  bool scored = false;  // false when n < min_n
  std::vector<double> subject_scores;
  double mean = 0.0;
  std::optional<double> std;
};

struct CategoryResult {
  std::string model_id;
  std::vector<CategoryScore> categories;
  std::vector<std::string> subject_ids;
  std::vector<double> subject_global_pooled;  // pooled out-of-fold score over all labelled stimuli
  std::vector<double> subject_global_rho;
  Index n_scored = 0;
  AnalysisConfig config;
};

CategoryResult run_category(const Dataset& dataset, const std::string& model_id, const CategoryLabels& labels,
                            const AnalysisConfig& cfg);

// ---------------------------------------------------------------------------
// Benchmark regression

struct BenchmarkPoint {
  std::string model_id;
  double similarity = 0.0;
  double score = 0.0;
};

struct BenchmarkTask {
  std::string task;
  std::vector<BenchmarkPoint> points;
  RegressionResult regression;
  std::vector<std::array<double, 3>> band;  // (x, lower, upper) samples
};

struct BenchmarkResult {
  std::string metric;
  std::vector<BenchmarkTask> tasks;
};

struct BenchmarkScore {
  std::string model_id, task;
  double score = 0.0;
};

std::vector<BenchmarkScore> read_benchmark_scores(const std::filesystem::path& csv);  // model_id,task,score

BenchmarkResult run_benchmark_corr(const std::vector<AlignmentReport>& reports,
                                   const std::vector<BenchmarkScore>& scores, const std::string& metric = "pearson",
                                   int band_points = 50);

// ---------------------------------------------------------------------------
// RDM export

struct RdmResult {
  std::string model_id;
  std::vector<std::string> subject_ids;
  std::vector<RDM> predicted;
  std::vector<RDM> observed;
  std::vector<std::optional<double>> rsa_spearman;
  std::vector<std::optional<double>> rsa_kendall;
};

RdmResult run_rdm(const Dataset& dataset, const std::string& model_id, const AnalysisConfig& cfg);

}  // namespace brainalign
