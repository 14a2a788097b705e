#include "brainalign/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "brainalign/analyses.hpp"
#include "brainalign/log.hpp"
#include "brainalign/npy.hpp"
#include "brainalign/preprocess.hpp"
#include "brainalign/report.hpp"
#include "brainalign/rng.hpp"
#include "brainalign/synth.hpp"
#include "json.hpp"

namespace brainalign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliOptions {
  std::string manifest;
  std::vector<std::string> models;
  std::vector<std::string> subjects;
  std::string out;
  std::uint64_t seed = 0;
  int k_folds = 5;
  double alpha_min = 1e-2, alpha_max = 1e3;
  int alpha_points = 20;
  std::string fit_scope = "train_fold";
  double window_ms = 100.0;
  std::vector<std::string> formats{"json"};
  int verbose = 0;
  bool quiet = false;
  int jobs = 1;
  bool json_errors = false;
  int n_perm = 200;
  Index pca = 256;
  std::string layer = "final";
  std::string spec;
  int n_subjects = 1;
  std::string dtype = "f8";
  std::string scores;
  std::string montage;
  std::string metric = "pearson";
  std::string categories;
  std::string category_mode = "global";
  Index category_min_n = 5;
  std::string pooling = "pooled";
  std::vector<double> baseline;
  std::vector<std::string> reports;
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io:
    case ErrorKind::Numerical:
      return 2;
    default:
      return 1;
  }
}

void report_error(const CliOptions& o, const std::string& kind, const std::string& code, const std::string& message) {
  if (o.json_errors) {
    std::cerr << json{{"error", {{"kind", kind}, {"code", code}, {"message", message}}}}.dump() << '\n';
  } else {
    std::cerr << "error [" << code << "]: " << message << '\n';
  }
}

fs::path output_dir(const CliOptions& o) {
  fs::path dir;
  if (!o.out.empty()) {
    dir = o.out;
  } else if (const char* env = std::getenv(kOutDirEnv); env && *env) {
    dir = env;
  } else {
    dir = ".";
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "IO", "cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

AnalysisConfig analysis_config(const CliOptions& o) {
  AnalysisConfig cfg;
  cfg.cv.k_folds = o.k_folds;
  cfg.cv.alpha_grid = log_spaced_grid(o.alpha_min, o.alpha_max, o.alpha_points);
  cfg.cv.rng_seed = o.seed;
  cfg.cv.fit_scope = fit_scope_from_string(o.fit_scope);
  cfg.cv.pca_components = o.pca;
  cfg.cv.jobs = o.jobs;
  cfg.layer = LayerSelector::parse(o.layer);
  cfg.n_perm = o.n_perm;
  cfg.perm_seed = derive_seed(o.seed, 0x7065726dULL);
  cfg.window_ms = o.window_ms;
  cfg.category_min_n = o.category_min_n;
  if (o.category_mode == "global") {
    cfg.category_mode = CategoryMode::GlobalFit;
  } else if (o.category_mode == "refit") {
    cfg.category_mode = CategoryMode::Refit;
  } else {
    throw parameter_error("--category-mode must be global or refit");
  }
  if (o.pooling == "pooled") {
    cfg.pooling = MetricPooling::Pooled;
  } else if (o.pooling == "per_fold") {
    cfg.pooling = MetricPooling::PerFold;
  } else {
    throw parameter_error("--pooling must be pooled or per_fold");
  }
  if (!o.baseline.empty()) {
    if (o.baseline.size() != 2) throw parameter_error("--baseline takes START END in ms");
    cfg.baseline_ms = std::pair{o.baseline[0], o.baseline[1]};
  }
  cfg.jobs = o.jobs;
  cfg.cv.validate();
  return cfg;
}

Dataset load_filtered(const CliOptions& o) {
  if (o.manifest.empty()) throw parameter_error("--manifest is required");
  Dataset ds = load_dataset(o.manifest);
  if (!o.subjects.empty()) {
    std::vector<Subject> kept;
    for (const auto& id : o.subjects) {
      auto it = std::find_if(ds.subjects.begin(), ds.subjects.end(), [&](const Subject& s) { return s.subject_id == id; });
      if (it == ds.subjects.end()) throw Error(ErrorKind::Config, "UNKNOWN_SUBJECT", "no subject '" + id + "' in manifest");
      kept.push_back(*it);
    }
    ds.subjects = std::move(kept);
  }
  return ds;
}

std::vector<std::string> selected_models(const CliOptions& o, const Dataset& ds) {
  if (!o.models.empty()) {
    for (const auto& m : o.models) ds.model(m);  // throws UNKNOWN_MODEL
    return o.models;
  }
  std::vector<std::string> all;
  for (const auto& f : ds.features) all.push_back(f.model_id);
  return all;
}

template <typename Result>
void export_all(const Result& result, const fs::path& stem, const std::vector<std::string>& formats) {
  for (const auto& name : formats) {
    const ReportFormat format = report_format_from_string(name);
    fs::path path = stem;
    path += extension(format);
    export_report(result, path, format);
    std::cout << path.string() << '\n';
  }
}

SynthSpec synth_spec_from_json(const json& j, int& n_subjects, NpyDtype& dtype) {
  SynthSpec s;
  for (const auto& [key, v] : j.items()) {
    if (key == "n_stimuli") s.n_stimuli = v.get<Index>();
    else if (key == "n_repetitions") s.n_repetitions = v.get<int>();
    else if (key == "channel_names") s.channel_names = v.get<std::vector<std::string>>();
    else if (key == "sfreq") s.sfreq = v.get<double>();
    else if (key == "epoch_ms") s.epoch_ms = v.get<double>();
    else if (key == "n_layers") s.n_layers = v.get<Index>();
    else if (key == "dim") s.dim = v.get<Index>();
    else if (key == "snr") s.snr = v.get<double>();
    else if (key == "planted_layer") s.planted_layer = v.get<Index>();
    else if (key == "planted_window") s.planted_window = {v.at(0).get<double>(), v.at(1).get<double>()};
    else if (key == "planted_channels") s.planted_channels = v.get<std::vector<std::string>>();
    else if (key == "planted_region") s.planted_region = region_from_string(v.get<std::string>());
    else if (key == "model_id") s.model_id = v.get<std::string>();
    else if (key == "seed") s.seed = v.get<std::uint64_t>();
    else if (key == "n_subjects") n_subjects = v.get<int>();
    else if (key == "dtype") dtype = dtype_from_descr(v.get<std::string>() == "f4" ? "<f4" : "<f8");
    else if (key == "categories") {
      for (const auto& c : v) {
        SynthCategory cat;
        if (c.is_string()) {
          cat.name = c.get<std::string>();
        } else {
          cat.name = c.at("name").get<std::string>();
          if (c.contains("snr") && !c["snr"].is_null()) cat.snr = c["snr"].get<double>();
        }
        s.categories.push_back(std::move(cat));
      }
    } else {
      throw Error(ErrorKind::Validation, "UNKNOWN_KEY", "synth spec: unknown key '" + key + "'");
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_validate(const CliOptions& o) {
  if (o.manifest.empty()) throw parameter_error("--manifest is required");
  const auto issues = validate_manifest(o.manifest);
  for (const auto& issue : issues) std::cout << issue.code << ": " << issue.message << '\n';
  if (issues.empty()) {
    std::cout << "OK: " << o.manifest << '\n';
    return 0;
  }
  std::cerr << issues.size() << " issue(s) in " << o.manifest << '\n';
  return 1;
}

int cmd_synth(const CliOptions& o) {
  SynthSpec spec;
  int n_subjects = o.n_subjects;
  NpyDtype dtype = o.dtype == "f4" ? NpyDtype::F4 : NpyDtype::F8;
  if (o.dtype != "f4" && o.dtype != "f8") throw parameter_error("--dtype must be f4 or f8");
  if (!o.spec.empty()) {
    std::ifstream in(o.spec);
    if (!in) throw Error(ErrorKind::Io, "IO", "cannot read " + o.spec);
    json j;
    try {
      j = json::parse(in);
      spec = synth_spec_from_json(j, n_subjects, dtype);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Format, "PARSE_ERROR", o.spec + ": " + e.what());
    }
    if (!j.contains("seed")) spec.seed = o.seed;
  } else {
    spec.seed = o.seed;
  }
  const fs::path manifest = write_synth_dataset(spec, output_dir(o), n_subjects, dtype);
  std::cout << manifest.string() << '\n';
  return 0;
}

int cmd_align(const CliOptions& o) {
  const Dataset ds = load_filtered(o);
  const AnalysisConfig cfg = analysis_config(o);
  const fs::path dir = output_dir(o);
  for (const auto& model : selected_models(o, ds)) {
    const AlignmentReport report = run_alignment(ds, model, cfg);
    export_all(report, dir / ("alignment_" + model), o.formats);
  }
  return 0;
}

int cmd_layer_time(const CliOptions& o) {
  const Dataset ds = load_filtered(o);
  AnalysisConfig cfg = analysis_config(o);
  const fs::path dir = output_dir(o);
  for (const auto& model : selected_models(o, ds)) {
    const LayerTimeResult r = run_layer_time(ds, model, cfg);
    const auto& w = r.windows[static_cast<std::size_t>(r.argmax.second)];
    std::cerr << model << ": peak layer " << r.argmax.first << " window [" << w.first << ", " << w.second << ") ms\n";
    export_all(r, dir / ("layer_time_" + model), o.formats);
  }
  return 0;
}

int cmd_topo(const CliOptions& o) {
  const Dataset ds = load_filtered(o);
  const AnalysisConfig cfg = analysis_config(o);
  if (ds.subjects.empty()) throw parameter_error("no subjects selected");
  std::optional<Montage> override_montage;
  if (o.montage == "builtin") {
    override_montage = Montage::builtin();
  } else if (!o.montage.empty()) {
    override_montage = Montage::read_csv(o.montage);
  }
  const auto windows = tile_windows(ds.subjects.front().epochs, o.window_ms);
  const fs::path dir = output_dir(o);
  for (const auto& model : selected_models(o, ds)) {
    const TopoResult r = run_topo(ds, model, windows, cfg, override_montage ? &*override_montage : nullptr);
    export_all(r, dir / ("topo_" + model), o.formats);
  }
  return 0;
}

int cmd_category(const CliOptions& o) {
  const Dataset ds = load_filtered(o);
  const AnalysisConfig cfg = analysis_config(o);
  CategoryLabels labels;
  if (!o.categories.empty()) {
    labels = CategoryLabels::read_csv(o.categories);
  } else if (ds.categories) {
    labels = *ds.categories;
  } else {
    throw Error(ErrorKind::Config, "MISSING_CATEGORIES", "no category labels: pass --categories or set categories_path");
  }
  const fs::path dir = output_dir(o);
  for (const auto& model : selected_models(o, ds)) {
    const CategoryResult r = run_category(ds, model, labels, cfg);
    export_all(r, dir / ("category_" + model), o.formats);
  }
  return 0;
}

int cmd_benchmark(const CliOptions& o) {
  if (o.reports.empty()) throw parameter_error("--reports needs at least one alignment report");
  if (o.scores.empty()) throw parameter_error("--scores is required");
  std::vector<AlignmentReport> reports;
  for (const auto& p : o.reports) reports.push_back(load_alignment_report(p));
  const auto scores = read_benchmark_scores(o.scores);
  const BenchmarkResult r = run_benchmark_corr(reports, scores, o.metric);
  export_all(r, output_dir(o) / "benchmark_corr", o.formats);
  return 0;
}

int cmd_rdm(const CliOptions& o) {
  const Dataset ds = load_filtered(o);
  const AnalysisConfig cfg = analysis_config(o);
  const fs::path dir = output_dir(o);
  for (const auto& model : selected_models(o, ds)) {
    const RdmResult r = run_rdm(ds, model, cfg);
    for (std::size_t s = 0; s < r.subject_ids.size(); ++s) {
      const fs::path pred = dir / ("rdm_" + model + "_" + r.subject_ids[s] + "_predicted.npy");
      const fs::path obs = dir / ("rdm_" + model + "_" + r.subject_ids[s] + "_observed.npy");
      save_npy(to_npy(r.predicted[s].values), pred);
      save_npy(to_npy(r.observed[s].values), obs);
      std::cout << pred.string() << '\n' << obs.string() << '\n';
    }
    export_all(r, dir / ("rdm_" + model), {"json"});
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CliOptions o;
  CLI::App app{"Model-to-EEG alignment engine: ridge encoding, similarity metrics and permutation statistics."};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  auto add_common = [&](CLI::App* sub) {
    sub->add_flag("-v,--verbose", o.verbose, "Increase log verbosity (repeatable)");
    sub->add_flag("-q,--quiet", o.quiet, "Suppress warnings");
    sub->add_flag("--json-errors", o.json_errors, "Report errors as one JSON object on standard error");
    sub->add_option("--out", o.out, std::string("Output directory (default: $") + kOutDirEnv + " or .)");
  };
  auto add_analysis = [&](CLI::App* sub) {
    add_common(sub);
    sub->add_option("--manifest", o.manifest, "Dataset manifest JSON")->required();
    sub->add_option("--model", o.models, "Model id(s) to analyse (default: all)");
    sub->add_option("--subject", o.subjects, "Subject id(s) to include (default: all)");
    sub->add_option("--seed", o.seed, "Seed for fold assignment and permutations")->capture_default_str();
    sub->add_option("--k-folds", o.k_folds, "Outer cross-validation folds")->capture_default_str();
    sub->add_option("--alpha-min", o.alpha_min, "Smallest ridge penalty in the grid")->capture_default_str();
    sub->add_option("--alpha-max", o.alpha_max, "Largest ridge penalty in the grid")->capture_default_str();
    sub->add_option("--alpha-points", o.alpha_points, "Log-spaced grid size")->capture_default_str();
    sub->add_option("--fit-scope", o.fit_scope, "Where standardization/PCA are fitted")
        ->check(CLI::IsMember({"train_fold", "global"}))
        ->capture_default_str();
    sub->add_option("--pca", o.pca, "Target PCA components (0 disables)")->capture_default_str();
    sub->add_option("--layer", o.layer, "Layer selector: final, all or an index")->capture_default_str();
    sub->add_option("--window-ms", o.window_ms, "Window width for time tiling")->capture_default_str();
    sub->add_option("--n-perm", o.n_perm, "Permutations for the null distribution (0 skips)")->capture_default_str();
    sub->add_option("--baseline", o.baseline, "Baseline window START END in ms")->expected(2);
    sub->add_option("--jobs", o.jobs, "Worker threads; 1 is bitwise reproducible")->capture_default_str();
    sub->add_option("--format", o.formats, "Output format(s): json, csv, svg")
        ->check(CLI::IsMember({"json", "csv", "svg"}))
        ->capture_default_str();
  };

  auto* validate = app.add_subcommand("validate", "Check a manifest and its files; print every issue");
  add_common(validate);
  validate->add_option("--manifest", o.manifest, "Dataset manifest JSON")->required();

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with planted structure");
  add_common(synth);
  synth->add_option("--spec", o.spec, "Synthetic spec JSON (defaults otherwise)");
  synth->add_option("--seed", o.seed, "Seed when the spec has none")->capture_default_str();
  synth->add_option("--n-subjects", o.n_subjects, "Subjects to generate")->capture_default_str();
  synth->add_option("--dtype", o.dtype, "Tensor dtype: f4 or f8")->capture_default_str();

  auto* align = app.add_subcommand("align", "Encoding model plus metric battery per subject");
  add_analysis(align);
  align->add_option("--pooling", o.pooling, "Metric pooling: pooled or per_fold")->capture_default_str();

  auto* layer_time = app.add_subcommand("layer-time", "Layer by time-window encoding grid");
  add_analysis(layer_time);

  auto* topo = app.add_subcommand("topo", "Per-channel, per-window encoding with regional summaries");
  add_analysis(topo);
  topo->add_option("--montage", o.montage, "Montage CSV or 'builtin' (default: manifest montage)");

  auto* category = app.add_subcommand("category", "Per-category scores from out-of-fold predictions");
  add_analysis(category);
  category->add_option("--categories", o.categories, "Category CSV (default: manifest categories)");
  category->add_option("--category-mode", o.category_mode, "global or refit")->capture_default_str();
  category->add_option("--min-n", o.category_min_n, "Minimum stimuli to score a category")->capture_default_str();

  auto* bench = app.add_subcommand("benchmark-corr", "Regress benchmark scores on alignment similarity");
  add_common(bench);
  bench->add_option("--reports", o.reports, "Alignment report JSON files")->required();
  bench->add_option("--scores", o.scores, "Benchmark CSV (model_id,task,score)")->required();
  bench->add_option("--metric", o.metric, "Similarity metric for x")->capture_default_str();
  bench->add_option("--format", o.formats, "Output format(s): json, csv")->check(CLI::IsMember({"json", "csv"}));

  auto* rdm = app.add_subcommand("rdm", "Export predicted and observed RDMs per subject");
  add_analysis(rdm);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (o.json_errors) {
      report_error(o, "usage", "USAGE", e.what());
      return 1;
    }
    app.exit(e);
    return 1;
  }

  log::set_level(o.quiet ? log::Level::Quiet
                         : static_cast<log::Level>(std::min(3, static_cast<int>(log::Level::Warn) + o.verbose)));

  try {
    if (*validate) return cmd_validate(o);
    if (*synth) return cmd_synth(o);
    if (*align) return cmd_align(o);
    if (*layer_time) return cmd_layer_time(o);
    if (*topo) return cmd_topo(o);
    if (*category) return cmd_category(o);
    if (*bench) return cmd_benchmark(o);
    if (*rdm) return cmd_rdm(o);
  } catch (const Error& e) {
    report_error(o, to_string(e.kind()), e.code(), e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    report_error(o, "runtime", "RUNTIME", e.what());
    return 2;
  }
  return 1;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"brainalign"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace brainalign
