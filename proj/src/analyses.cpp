#include "brainalign/analyses.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "brainalign/log.hpp"
#include "brainalign/preprocess.hpp"
#include "csv.hpp"

namespace brainalign {

LayerSelector LayerSelector::parse(const std::string& text) {
  if (text == "final" || text.empty()) return final_layer();
  if (text == "all") return all();
  try {
    std::size_t used = 0;
    const long long i = std::stoll(text, &used);
    if (used == text.size() && i >= 0) return at(static_cast<Index>(i));
  } catch (const std::exception&) {
  }
  throw parameter_error("layer selector must be 'final', 'all' or a non-negative index, got '" + text + "'");
}

std::string LayerSelector::to_string() const {
  switch (kind) {
    case Kind::Final: return "final";
    case Kind::All: return "all";
    case Kind::Index: return std::to_string(index);
  }
  return "final";
}

namespace {

// Context prefix for errors raised while processing one subject.
template <typename Fn>
auto with_context(const std::string& context, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), e.code(), context + ": " + e.what());
  }
}

struct SubjectData {
  EEGEpochs epochs;  // repetition-averaged (and baseline-corrected when asked)
  std::vector<Index> rows;
  std::pair<double, double> window;
  Matrix y;  // flattened response window
};

SubjectData prepare_subject(const Subject& subject, const FeatureTensor& features, const AnalysisConfig& cfg) {
  SubjectData d;
  d.epochs = average_repetitions(subject.epochs);
  if (cfg.baseline_ms) d.epochs = baseline_correct(d.epochs, cfg.baseline_ms->first, cfg.baseline_ms->second);
  d.rows = match_rows(features, d.epochs.stimulus_ids);
  d.window = {std::max(0.0, d.epochs.t_start_ms), d.epochs.t_end_ms};
  d.y = window_flatten(d.epochs, d.window.first, d.window.second);
  return d;
}

std::pair<Matrix, std::string> select_features(const FeatureTensor& ft, const LayerSelector& sel,
                                               const std::vector<Index>& rows) {
  auto name = [&](Index l) {
    return l < static_cast<Index>(ft.layer_names.size()) ? ft.layer_names[static_cast<std::size_t>(l)]
                                                         : "layer_" + std::to_string(l);
  };
  switch (sel.kind) {
    case LayerSelector::Kind::All:
      return {ft.data(rows, Eigen::all), "all"};
    case LayerSelector::Kind::Index:
      if (sel.index >= ft.n_layers)
        throw parameter_error("layer index " + std::to_string(sel.index) + " out of range (model has " +
                              std::to_string(ft.n_layers) + " layers)");
      return {ft.layer(sel.index)(rows, Eigen::all), name(sel.index)};
    case LayerSelector::Kind::Final:
      break;
  }
  return {ft.layer(ft.n_layers - 1)(rows, Eigen::all), name(ft.n_layers - 1)};
}

CVConfig cv_config(const AnalysisConfig& cfg) {
  CVConfig cv = cfg.cv;
  cv.jobs = cfg.jobs;
  return cv;
}

double mean_column_spearman(const Matrix& a, const Matrix& b) {
  double sum = 0.0;
  for (Index j = 0; j < a.cols(); ++j) sum += spearman(a.col(j), b.col(j)).value_or(0.0);
  return a.cols() ? sum / static_cast<double>(a.cols()) : 0.0;
}

struct RepresentationMetrics {
  std::optional<double> spearman, cka, rsa, kendall;
};

RepresentationMetrics representation_metrics(const Matrix& pred, const Matrix& obs, const std::vector<std::string>& ids) {
  RepresentationMetrics m;
  m.spearman = mean_column_spearman(pred, obs);
  m.cka = linear_cka(pred, obs);
  if (pred.cols() >= 2) {
    const RDM rp = compute_rdm(pred, ids);
    const RDM ro = compute_rdm(obs, ids);
    m.rsa = rsa_score(rp, ro, RankMethod::Spearman);
    m.kendall = rsa_score(rp, ro, RankMethod::Kendall);
  }
  return m;
}

std::optional<double> mean_defined(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::vector<std::string> subset(const std::vector<std::string>& ids, const std::vector<Index>& rows) {
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (Index r : rows) out.push_back(ids[static_cast<std::size_t>(r)]);
  return out;
}

}  // namespace

std::map<std::string, MetricAggregate> aggregate_metrics(const std::vector<SubjectAlignment>& subjects) {
  std::map<std::string, MetricAggregate> out;
  for (const char* name : kMetricNames) {
    std::vector<double> values;
    MetricAggregate agg;
    for (const auto& s : subjects) {
      auto it = s.metrics.find(name);
      if (it != s.metrics.end() && it->second) values.push_back(*it->second);
      else ++agg.n_undefined;
    }
    agg.n_defined = values.size();
    if (!values.empty()) {
      const auto a = aggregate_subjects(values);
      agg.mean = a.mean;
      agg.std = a.std;
    }
    out[name] = agg;
  }
  return out;
}

AlignmentReport run_alignment(const Dataset& dataset, const std::string& model_id, const AnalysisConfig& cfg) {
  const FeatureTensor& ft = dataset.model(model_id);
  const CVConfig cv_cfg = cv_config(cfg);
  AlignmentReport report;
  report.model_id = model_id;
  report.config = cfg;
  for (const auto& subject : dataset.subjects) {
    const std::string context = "subject " + subject.subject_id + ", model " + model_id;
    report.subjects.push_back(with_context(context, [&] {
      const SubjectData d = prepare_subject(subject, ft, cfg);
      auto [x, layer_name] = select_features(ft, cfg.layer, d.rows);
      report.layer = layer_name;
      report.response_window_ms = d.window;
      const CVResult cv = cv_encode(x, d.y, cv_cfg);

      SubjectAlignment s;
      s.subject_id = subject.subject_id;
      s.n_stimuli = d.y.rows();
      s.fold_scores = cv.score.fold_scores;
      s.fold_alphas = cv.score.fold_alphas;
      s.undefined_columns = cv.undefined_columns;
      s.pearson_pooled = score_pearson_columns(cv.oof, d.y, cfg.cv.score_mode);
      s.metrics["pearson"] = cv.score.rho;

      // Representation metrics in the z-scored observed space (the same
      // affine map applied to predictions and observations).
      const auto z = standardize_fit(d.y);
      const Matrix obs = standardize_apply(z, d.y);
      const Matrix pred = standardize_apply(z, cv.oof);
      RepresentationMetrics rm;
      if (cfg.pooling == MetricPooling::Pooled) {
        rm = representation_metrics(pred, obs, d.epochs.stimulus_ids);
      } else {
        std::vector<std::optional<double>> sp, ck, rs, kd;
        for (int f = 0; f < cv.plan.k; ++f) {
          const auto rows = cv.plan.test_rows(f);
          const auto m = representation_metrics(pred(rows, Eigen::all), obs(rows, Eigen::all),
                                                subset(d.epochs.stimulus_ids, rows));
          sp.push_back(m.spearman);
          ck.push_back(m.cka);
          rs.push_back(m.rsa);
          kd.push_back(m.kendall);
        }
        rm = {mean_defined(sp), mean_defined(ck), mean_defined(rs), mean_defined(kd)};
      }
      s.metrics["spearman"] = rm.spearman;
      s.metrics["cka"] = rm.cka;
      s.metrics["rsa"] = rm.rsa;
      s.metrics["kendall"] = rm.kendall;

      if (cfg.n_perm > 0) {
        const auto null = permutation_null(x, d.y, cv_cfg, cfg.n_perm, cfg.perm_seed);
        s.significance = significance_test(cv.score.fold_scores, null);
        s.null_mean = null.mean();
        s.null_std = null.stddev();
      }
      return s;
    }));
  }
  report.aggregate = aggregate_metrics(report.subjects);
  return report;
}

LayerTimeResult run_layer_time(const Dataset& dataset, const std::string& model_id, const AnalysisConfig& cfg) {
  const FeatureTensor& ft = dataset.model(model_id);
  if (ft.n_layers < 2)
    throw parameter_error("layer-time analysis needs features with at least 2 layers; model " + model_id + " has " +
                          std::to_string(ft.n_layers));
  const CVConfig cv_cfg = cv_config(cfg);
  LayerTimeResult out;
  out.model_id = model_id;
  out.layer_names = ft.layer_names;
  out.config = cfg;
  for (const auto& subject : dataset.subjects) {
    auto grid = with_context("subject " + subject.subject_id + ", model " + model_id, [&] {
      EEGEpochs ep = average_repetitions(subject.epochs);
      if (cfg.baseline_ms) ep = baseline_correct(ep, cfg.baseline_ms->first, cfg.baseline_ms->second);
      return layer_time_grid(ft, ep, cfg.window_ms, cv_cfg);
    });
    out.windows = grid.windows;
    out.subject_ids.push_back(subject.subject_id);
    out.subject_grids.push_back(std::move(grid.rho));
  }
  out.mean_grid = Matrix::Zero(out.subject_grids.front().rows(), out.subject_grids.front().cols());
  for (const auto& g : out.subject_grids) {
    if (g.rows() != out.mean_grid.rows() || g.cols() != out.mean_grid.cols())
      throw parameter_error("layer-time: subjects produced grids of different shapes");
    out.mean_grid += g;
  }
  out.mean_grid /= static_cast<double>(out.subject_grids.size());
  out.argmax = LayerTimeGrid{out.mean_grid, out.windows}.argmax();
  return out;
}

std::vector<RegionStats> region_stats(const Matrix& r, const std::vector<std::string>& channels,
                                      const std::vector<Region>& regions) {
  std::vector<RegionStats> out;
  auto stats_for = [&](Region region) {
    RegionStats s;
    s.region = region;
    std::vector<Index> members;
    for (std::size_t c = 0; c < channels.size(); ++c)
      if (regions[c] == region) {
        members.push_back(static_cast<Index>(c));
        s.channels.push_back(channels[c]);
      }
    if (members.empty()) return s;
    const Matrix cells = r(members, Eigen::all);
    auto mean_std = [](const Eigen::Ref<const Vector>& v) {
      const double m = v.mean();
      const double sd = v.size() > 1 ? std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1)) : 0.0;
      return std::pair{m, sd};
    };
    const Vector flat = cells.reshaped();
    std::tie(s.mean, s.std) = mean_std(flat);
    for (Index w = 0; w < cells.cols(); ++w) {
      const auto [m, sd] = mean_std(cells.col(w));
      s.window_mean.push_back(m);
      s.window_std.push_back(sd);
    }
    return s;
  };
  for (Region region : kScoredRegions) out.push_back(stats_for(region));
  if (std::find(regions.begin(), regions.end(), Region::Other) != regions.end()) out.push_back(stats_for(Region::Other));
  return out;
}

std::vector<Region> TopoResult::ranking() const {
  std::vector<const RegionStats*> scored;
  for (const auto& s : regions)
    if (s.region != Region::Other && !s.channels.empty()) scored.push_back(&s);
  std::stable_sort(scored.begin(), scored.end(), [](const RegionStats* a, const RegionStats* b) { return a->mean > b->mean; });
  std::vector<Region> out;
  for (const auto* s : scored) out.push_back(s->region);
  return out;
}

TopoResult run_topo(const Dataset& dataset, const std::string& model_id,
                    const std::vector<std::pair<double, double>>& windows, const AnalysisConfig& cfg,
                    const Montage* montage_override) {
  const Montage* montage = montage_override ? montage_override : (dataset.montage ? &*dataset.montage : nullptr);
  if (!montage)
    throw Error(ErrorKind::Config, "MISSING_MONTAGE", "topography needs a montage (manifest montage_path or --montage)");
  if (windows.empty()) throw parameter_error("topography needs at least one window");
  const FeatureTensor& ft = dataset.model(model_id);
  const CVConfig cv_cfg = cv_config(cfg);

  TopoResult out;
  out.model_id = model_id;
  out.windows = windows;
  out.montage = *montage;
  out.config = cfg;
  out.channel_names = dataset.subjects.front().epochs.channel_names;
  for (const auto& name : out.channel_names) {
    const auto* e = montage->find(name);
    if (!e) log::warn("montage has no entry for channel " + name + "; assigned to region Other");
    out.channel_regions.push_back(e ? e->region : Region::Other);
  }
  for (const auto& subject : dataset.subjects) {
    if (subject.epochs.channel_names != out.channel_names)
      throw Error(ErrorKind::Config, "CHANNEL_MISMATCH", "topography needs identical channel lists across subjects");
    auto r = with_context("subject " + subject.subject_id + ", model " + model_id, [&] {
      const SubjectData d = prepare_subject(subject, ft, cfg);
      const auto [x, _] = select_features(ft, cfg.layer, d.rows);
      return channel_window_encode(x, d.epochs, windows, cv_cfg);
    });
    out.subject_ids.push_back(subject.subject_id);
    out.subject_r.push_back(std::move(r));
  }
  out.r = Matrix::Zero(out.subject_r.front().rows(), out.subject_r.front().cols());
  for (const auto& r : out.subject_r) out.r += r;
  out.r /= static_cast<double>(out.subject_r.size());
  out.regions = region_stats(out.r, out.channel_names, out.channel_regions);
  return out;
}

CategoryResult run_category(const Dataset& dataset, const std::string& model_id, const CategoryLabels& labels,
                            const AnalysisConfig& cfg) {
  const FeatureTensor& ft = dataset.model(model_id);
  const CVConfig cv_cfg = cv_config(cfg);
  CategoryResult out;
  out.model_id = model_id;
  out.config = cfg;
  for (const auto& name : labels.categories) out.categories.push_back({name, 0, false, {}, 0.0, std::nullopt});

  bool first = true;
  for (const auto& subject : dataset.subjects) {
    with_context("subject " + subject.subject_id + ", model " + model_id, [&] {
      const SubjectData d = prepare_subject(subject, ft, cfg);
      auto [x, _] = select_features(ft, cfg.layer, d.rows);

      std::vector<std::vector<Index>> members(labels.categories.size());
      std::vector<Index> labelled;
      for (Index i = 0; i < d.y.rows(); ++i) {
        auto it = labels.by_stimulus.find(d.epochs.stimulus_ids[static_cast<std::size_t>(i)]);
        if (it == labels.by_stimulus.end()) continue;
        const auto pos = std::find(labels.categories.begin(), labels.categories.end(), it->second);
        if (pos == labels.categories.end())
          throw Error(ErrorKind::Validation, "UNKNOWN_CATEGORY", "category '" + it->second + "' is not declared");
        members[static_cast<std::size_t>(pos - labels.categories.begin())].push_back(i);
        labelled.push_back(i);
      }
      if (labelled.empty())
        throw Error(ErrorKind::Alignment, "NO_LABELLED_STIMULI", "no stimulus of this subject carries a category label");

      const CVResult cv = cv_encode(x, d.y, cv_cfg);
      out.subject_ids.push_back(subject.subject_id);
      out.subject_global_rho.push_back(cv.score.rho);
      out.subject_global_pooled.push_back(
          score_pearson_columns(cv.oof(labelled, Eigen::all), d.y(labelled, Eigen::all), cfg.cv.score_mode));

      for (std::size_t c = 0; c < members.size(); ++c) {
        auto& cat = out.categories[c];
        const auto n = static_cast<Index>(members[c].size());
        if (first) {
          cat.n = n;
          cat.scored = n >= std::max<Index>(cfg.category_min_n, 3);
          if (!cat.scored && n > 0)
            log::warn("category '" + cat.category + "' has " + std::to_string(n) + " stimuli (< " +
                      std::to_string(cfg.category_min_n) + "); flagged, not scored");
        } else if (n != cat.n) {
          log::warn("category '" + cat.category + "' has different stimulus counts across subjects");
        }
        if (!cat.scored) continue;
        const auto& rows = members[c];
        if (cfg.category_mode == CategoryMode::GlobalFit) {
          cat.subject_scores.push_back(
              score_pearson_columns(cv.oof(rows, Eigen::all), d.y(rows, Eigen::all), cfg.cv.score_mode));
        } else {
          const Matrix xc = x(rows, Eigen::all), yc = d.y(rows, Eigen::all);
          cat.subject_scores.push_back(cv_encode(xc, yc, cv_cfg).score.rho);
        }
      }
      if (first) {
        for (const auto& cat : out.categories) out.n_scored += cat.scored ? cat.n : 0;
      }
      first = false;
      return 0;
    });
  }
  for (auto& cat : out.categories) {
    if (cat.subject_scores.empty()) continue;
    const auto a = aggregate_subjects(cat.subject_scores);
    cat.mean = a.mean;
    cat.std = a.std;
  }
  return out;
}

std::vector<BenchmarkScore> read_benchmark_scores(const std::filesystem::path& csv) {
  const auto table = detail::read_csv(csv, {"model_id", "task", "score"});
  std::vector<BenchmarkScore> out;
  for (const auto& row : table.rows)
    out.push_back({row[0], row[1], detail::parse_double(row[2], csv.string() + " " + row[0] + "/" + row[1])});
  return out;
}

BenchmarkResult run_benchmark_corr(const std::vector<AlignmentReport>& reports,
                                   const std::vector<BenchmarkScore>& scores, const std::string& metric,
                                   int band_points) {
  std::unordered_map<std::string, double> similarity;
  for (const auto& r : reports) {
    auto it = r.aggregate.find(metric);
    if (it == r.aggregate.end()) throw parameter_error("benchmark: unknown metric '" + metric + "'");
    if (!it->second.mean) {
      log::warn("benchmark: model " + r.model_id + " has no defined " + metric + "; skipped");
      continue;
    }
    similarity[r.model_id] = *it->second.mean;
  }
  BenchmarkResult out;
  out.metric = metric;
  std::vector<std::string> tasks;
  for (const auto& s : scores)
    if (std::find(tasks.begin(), tasks.end(), s.task) == tasks.end()) tasks.push_back(s.task);
  for (const auto& task : tasks) {
    BenchmarkTask t;
    t.task = task;
    std::vector<double> xs, ys;
    for (const auto& s : scores) {
      if (s.task != task) continue;
      auto it = similarity.find(s.model_id);
      if (it == similarity.end()) continue;
      t.points.push_back({s.model_id, it->second, s.score});
      xs.push_back(it->second);
      ys.push_back(s.score);
    }
    if (xs.size() < 3)
      throw parameter_error("benchmark task '" + task + "' has " + std::to_string(xs.size()) +
                            " models with both a similarity and a score; need >= 3");
    t.regression = ols_fit(xs, ys);
    const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    const int points = std::max(2, band_points);
    for (int i = 0; i < points; ++i) {
      const double x = *lo_it + (*hi_it - *lo_it) * i / (points - 1);
      const auto [lo, hi] = t.regression.band(x);
      t.band.push_back({x, lo, hi});
    }
    out.tasks.push_back(std::move(t));
  }
  return out;
}

RdmResult run_rdm(const Dataset& dataset, const std::string& model_id, const AnalysisConfig& cfg) {
  const FeatureTensor& ft = dataset.model(model_id);
  const CVConfig cv_cfg = cv_config(cfg);
  RdmResult out;
  out.model_id = model_id;
  for (const auto& subject : dataset.subjects) {
    with_context("subject " + subject.subject_id + ", model " + model_id, [&] {
      const SubjectData d = prepare_subject(subject, ft, cfg);
      auto [x, _] = select_features(ft, cfg.layer, d.rows);
      const CVResult cv = cv_encode(x, d.y, cv_cfg);
      const auto z = standardize_fit(d.y);
      RDM pred = compute_rdm(standardize_apply(z, cv.oof), d.epochs.stimulus_ids);
      RDM obs = compute_rdm(standardize_apply(z, d.y), d.epochs.stimulus_ids);
      out.subject_ids.push_back(subject.subject_id);
      out.rsa_spearman.push_back(rsa_score(pred, obs, RankMethod::Spearman));
      out.rsa_kendall.push_back(rsa_score(pred, obs, RankMethod::Kendall));
      out.predicted.push_back(std::move(pred));
      out.observed.push_back(std::move(obs));
      return 0;
    });
  }
  return out;
}

}  // namespace brainalign
