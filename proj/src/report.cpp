#include "brainalign/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "csv.hpp"
#include "json.hpp"

namespace brainalign {

using nlohmann::json;

ReportFormat report_format_from_string(const std::string& text) {
  if (text == "json") return ReportFormat::Json;
  if (text == "csv") return ReportFormat::Csv;
  if (text == "svg") return ReportFormat::Svg;
  throw parameter_error("unknown report format '" + text + "' (json, csv, svg)");
}

const char* extension(ReportFormat format) noexcept {
  switch (format) {
    case ReportFormat::Json: return ".json";
    case ReportFormat::Csv: return ".csv";
    case ReportFormat::Svg: return ".svg";
  }
  return ".json";
}

namespace {

json opt(const std::optional<double>& v) { return v && std::isfinite(*v) ? json(*v) : json(nullptr); }
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

json windows_json(const std::vector<std::pair<double, double>>& windows) {
  json out = json::array();
  for (const auto& [a, b] : windows) out.push_back({a, b});
  return out;
}

const char* to_string(ScoreMode m) { return m == ScoreMode::PerColumn ? "per_column" : "flattened"; }
const char* to_string(ChannelTarget t) { return t == ChannelTarget::WindowMean ? "window_mean" : "flattened"; }
const char* to_string(MetricPooling p) { return p == MetricPooling::Pooled ? "pooled" : "per_fold"; }
const char* to_string(CategoryMode m) { return m == CategoryMode::GlobalFit ? "global" : "refit"; }

json config_json(const AnalysisConfig& c) {
  json j;
  j["k_folds"] = c.cv.k_folds;
  j["alpha_grid"] = c.cv.alpha_grid;
  j["cv_seed"] = c.cv.rng_seed;
  j["fit_scope"] = brainalign::to_string(c.cv.fit_scope);
  j["standardize"] = c.cv.standardize;
  j["pca_components"] = c.cv.pca_components;
  j["pca_features"] = c.cv.pca_features;
  j["pca_feature_components"] = c.cv.pca_feature_components;
  j["score_mode"] = to_string(c.cv.score_mode);
  j["channel_target"] = to_string(c.cv.channel_target);
  j["layer"] = c.layer.to_string();
  j["n_perm"] = c.n_perm;
  j["perm_seed"] = c.perm_seed;
  j["baseline_ms"] = c.baseline_ms ? json{c.baseline_ms->first, c.baseline_ms->second} : json(nullptr);
  j["metric_pooling"] = to_string(c.pooling);
  j["window_ms"] = c.window_ms;
  j["category_min_n"] = c.category_min_n;
  j["category_mode"] = to_string(c.category_mode);
  return j;
}

AnalysisConfig config_from_json(const json& j) {
  AnalysisConfig c;
  c.cv.k_folds = j.at("k_folds").get<int>();
  c.cv.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
  c.cv.rng_seed = j.at("cv_seed").get<std::uint64_t>();
  c.cv.fit_scope = fit_scope_from_string(j.at("fit_scope").get<std::string>());
  c.cv.standardize = j.at("standardize").get<bool>();
  c.cv.pca_components = j.at("pca_components").get<Index>();
  c.cv.pca_features = j.at("pca_features").get<bool>();
  c.cv.pca_feature_components = j.at("pca_feature_components").get<Index>();
  c.cv.score_mode = j.at("score_mode") == "flattened" ? ScoreMode::Flattened : ScoreMode::PerColumn;
  c.cv.channel_target = j.at("channel_target") == "flattened" ? ChannelTarget::Flattened : ChannelTarget::WindowMean;
  c.layer = LayerSelector::parse(j.at("layer").get<std::string>());
  c.n_perm = j.at("n_perm").get<int>();
  c.perm_seed = j.at("perm_seed").get<std::uint64_t>();
  if (!j.at("baseline_ms").is_null()) c.baseline_ms = std::pair{j["baseline_ms"][0].get<double>(), j["baseline_ms"][1].get<double>()};
  c.pooling = j.at("metric_pooling") == "per_fold" ? MetricPooling::PerFold : MetricPooling::Pooled;
  c.window_ms = j.at("window_ms").get<double>();
  c.category_min_n = j.at("category_min_n").get<Index>();
  c.category_mode = j.at("category_mode") == "refit" ? CategoryMode::Refit : CategoryMode::GlobalFit;
  return c;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";
  return detail::format_double(v);
}
std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "IO", "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "IO", "write failed for " + path.string());
}

// Diverging blue-white-red map over [-limit, limit].
std::string fill_colour(double value, double limit) {
  const double t = limit > 0 ? std::clamp(value / limit, -1.0, 1.0) : 0.0;
  auto channel = [](double c) { return static_cast<int>(std::lround(255.0 * std::clamp(c, 0.0, 1.0))); };
  int r, g, b;
  if (t >= 0) {
    r = 255;
    g = channel(1.0 - t);
    b = channel(1.0 - t);
  } else {
    r = channel(1.0 + t);
    g = channel(1.0 + t);
    b = 255;
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// JSON

std::string to_json_text(const AlignmentReport& r) {
  json j;
  j["kind"] = "alignment";
  j["model_id"] = r.model_id;
  j["layer"] = r.layer;
  j["response_window_ms"] = {r.response_window_ms.first, r.response_window_ms.second};
  j["config"] = config_json(r.config);
  j["subjects"] = json::array();
  for (const auto& s : r.subjects) {
    json e;
    e["subject_id"] = s.subject_id;
    e["n_stimuli"] = s.n_stimuli;
    json metrics;
    for (const char* name : kMetricNames) {
      auto it = s.metrics.find(name);
      metrics[name] = it == s.metrics.end() ? json(nullptr) : opt(it->second);
    }
    e["metrics"] = metrics;
    e["pearson_pooled"] = num(s.pearson_pooled);
    e["fold_scores"] = s.fold_scores;
    e["fold_alphas"] = s.fold_alphas;
    e["undefined_columns"] = s.undefined_columns;
    if (s.significance) {
      e["significance"] = {{"t", num(s.significance->t)},
                           {"t_sign", std::isnan(s.significance->t) ? 0 : (s.significance->t > 0 ? 1 : -1)},
                           {"df", s.significance->df},
                           {"p_t", num(s.significance->p_t)},
                           {"p_empirical", num(s.significance->empirical_p)},
                           {"degenerate", s.significance->degenerate},
                           {"null_mean", opt(s.null_mean)},
                           {"null_std", opt(s.null_std)}};
    } else {
      e["significance"] = nullptr;
    }
    j["subjects"].push_back(std::move(e));
  }
  json agg;
  for (const auto& [name, a] : r.aggregate)
    agg[name] = {{"mean", opt(a.mean)}, {"std", opt(a.std)}, {"n_defined", a.n_defined}, {"n_undefined", a.n_undefined}};
  j["aggregate"] = agg;
  return dump(j);
}

AlignmentReport alignment_report_from_json(const std::string& text) {
  AlignmentReport r;
  try {
    const json j = json::parse(text);
    if (j.value("kind", "") != "alignment")
      throw Error(ErrorKind::Format, "BAD_REPORT", "alignment report: missing kind \"alignment\"");
    r.model_id = j.at("model_id").get<std::string>();
    r.layer = j.at("layer").get<std::string>();
    r.response_window_ms = {j.at("response_window_ms")[0].get<double>(), j.at("response_window_ms")[1].get<double>()};
    r.config = config_from_json(j.at("config"));
    for (const auto& e : j.at("subjects")) {
      SubjectAlignment s;
      s.subject_id = e.at("subject_id").get<std::string>();
      s.n_stimuli = e.at("n_stimuli").get<Index>();
      for (const auto& [name, v] : e.at("metrics").items()) s.metrics[name] = opt_from(v);
      s.pearson_pooled = e.at("pearson_pooled").is_null() ? std::nan("") : e.at("pearson_pooled").get<double>();
      s.fold_scores = e.at("fold_scores").get<std::vector<double>>();
      s.fold_alphas = e.at("fold_alphas").get<std::vector<double>>();
      s.undefined_columns = e.at("undefined_columns").get<Index>();
      if (!e.at("significance").is_null()) {
        const auto& g = e["significance"];
        SignificanceResult sig;
        if (g.at("t").is_null()) {
          const int sign = g.value("t_sign", 0);
          sig.t = sign == 0 ? std::nan("") : sign * std::numeric_limits<double>::infinity();
        } else {
          sig.t = g["t"].get<double>();
        }
        sig.df = g.at("df").get<int>();
        sig.p_t = g.at("p_t").get<double>();
        sig.empirical_p = g.at("p_empirical").get<double>();
        sig.degenerate = g.at("degenerate").get<bool>();
        s.significance = sig;
        s.null_mean = opt_from(g.at("null_mean"));
        s.null_std = opt_from(g.at("null_std"));
      }
      r.subjects.push_back(std::move(s));
    }
    for (const auto& [name, a] : j.at("aggregate").items())
      r.aggregate[name] = {opt_from(a.at("mean")), opt_from(a.at("std")), a.at("n_defined").get<std::size_t>(),
                           a.at("n_undefined").get<std::size_t>()};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, "BAD_REPORT", std::string("alignment report: ") + e.what());
  }
  return r;
}

AlignmentReport load_alignment_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "IO", "cannot read " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return alignment_report_from_json(text);
  } catch (const Error& e) {
    throw Error(e.kind(), e.code(), path.string() + ": " + e.what());
  }
}

std::string to_json_text(const LayerTimeResult& r) {
  json j;
  j["kind"] = "layer_time";
  j["model_id"] = r.model_id;
  j["layer_names"] = r.layer_names;
  j["windows_ms"] = windows_json(r.windows);
  j["config"] = config_json(r.config);
  j["mean_grid"] = matrix_json(r.mean_grid);
  j["argmax"] = {{"layer", r.argmax.first},
                 {"layer_name", r.argmax.first < static_cast<Index>(r.layer_names.size())
                                    ? r.layer_names[static_cast<std::size_t>(r.argmax.first)]
                                    : ""},
                 {"window", r.argmax.second},
                 {"window_ms", {r.windows[static_cast<std::size_t>(r.argmax.second)].first,
                                r.windows[static_cast<std::size_t>(r.argmax.second)].second}}};
  j["subjects"] = json::array();
  for (std::size_t s = 0; s < r.subject_ids.size(); ++s)
    j["subjects"].push_back({{"subject_id", r.subject_ids[s]}, {"grid", matrix_json(r.subject_grids[s])}});
  return dump(j);
}

std::string to_json_text(const TopoResult& r) {
  json j;
  j["kind"] = "topo";
  j["model_id"] = r.model_id;
  j["windows_ms"] = windows_json(r.windows);
  j["config"] = config_json(r.config);
  j["channels"] = json::array();
  for (std::size_t c = 0; c < r.channel_names.size(); ++c) {
    json e{{"channel", r.channel_names[c]}, {"region", to_string(r.channel_regions[c])}};
    std::vector<double> row(r.r.row(static_cast<Index>(c)).begin(), r.r.row(static_cast<Index>(c)).end());
    e["r"] = row;
    if (const auto* m = r.montage.find(r.channel_names[c])) e["position"] = {m->x, m->y};
    j["channels"].push_back(std::move(e));
  }
  j["regions"] = json::array();
  for (const auto& s : r.regions)
    j["regions"].push_back({{"region", to_string(s.region)},
                            {"channels", s.channels},
                            {"mean", num(s.mean)},
                            {"std", num(s.std)},
                            {"window_mean", s.window_mean},
                            {"window_std", s.window_std}});
  json ranking = json::array();
  for (Region reg : r.ranking()) ranking.push_back(to_string(reg));
  j["ranking"] = ranking;
  j["subjects"] = json::array();
  for (std::size_t s = 0; s < r.subject_ids.size(); ++s)
    j["subjects"].push_back({{"subject_id", r.subject_ids[s]}, {"r", matrix_json(r.subject_r[s])}});
  return dump(j);
}

std::string to_json_text(const CategoryResult& r) {
  json j;
  j["kind"] = "category";
  j["model_id"] = r.model_id;
  j["config"] = config_json(r.config);
  j["n_scored"] = r.n_scored;
  j["subjects"] = json::array();
  for (std::size_t s = 0; s < r.subject_ids.size(); ++s)
    j["subjects"].push_back({{"subject_id", r.subject_ids[s]},
                             {"global_pooled", num(r.subject_global_pooled[s])},
                             {"global_rho", num(r.subject_global_rho[s])}});
  j["categories"] = json::array();
  for (const auto& c : r.categories)
    j["categories"].push_back({{"category", c.category},
                               {"n", c.n},
                               {"scored", c.scored},
                               {"subject_scores", c.subject_scores},
                               {"mean", c.scored ? num(c.mean) : json(nullptr)},
                               {"std", opt(c.std)}});
  return dump(j);
}

std::string to_json_text(const BenchmarkResult& r) {
  json j;
  j["kind"] = "benchmark_corr";
  j["metric"] = r.metric;
  j["tasks"] = json::array();
  for (const auto& t : r.tasks) {
    json pts = json::array();
    for (const auto& p : t.points) pts.push_back({{"model_id", p.model_id}, {"similarity", p.similarity}, {"score", p.score}});
    json band = json::array();
    for (const auto& b : t.band) band.push_back({{"x", b[0]}, {"lower", b[1]}, {"upper", b[2]}});
    const auto& g = t.regression;
    j["tasks"].push_back({{"task", t.task},
                          {"points", pts},
                          {"n", g.n},
                          {"slope", num(g.slope)},
                          {"intercept", num(g.intercept)},
                          {"r_squared", num(g.r_squared)},
                          {"p_value", num(g.p_value)},
                          {"slope_se", num(g.slope_se)},
                          {"residual_se", num(g.residual_se)},
                          {"t_crit", num(g.t_crit)},
                          {"x_mean", num(g.x_mean)},
                          {"sxx", num(g.sxx)},
                          {"ci95_band", band}});
  }
  return dump(j);
}

std::string to_json_text(const RdmResult& r) {
  json j;
  j["kind"] = "rdm";
  j["model_id"] = r.model_id;
  j["subjects"] = json::array();
  for (std::size_t s = 0; s < r.subject_ids.size(); ++s)
    j["subjects"].push_back({{"subject_id", r.subject_ids[s]},
                             {"n_stimuli", r.predicted[s].size()},
                             {"rsa_spearman", opt(r.rsa_spearman[s])},
                             {"rsa_kendall", opt(r.rsa_kendall[s])}});
  return dump(j);
}

// ---------------------------------------------------------------------------
// CSV

std::string to_csv_text(const AlignmentReport& r) {
  std::ostringstream os;
  os << "subject_id,pearson,spearman,cka,rsa,kendall,pearson_pooled,t,df,p_t,p_empirical\n";
  for (const auto& s : r.subjects) {
    os << s.subject_id;
    for (const char* name : kMetricNames) {
      auto it = s.metrics.find(name);
      os << ',' << (it == s.metrics.end() ? "" : fmt(it->second));
    }
    os << ',' << fmt(s.pearson_pooled);
    if (s.significance)
      os << ',' << fmt(s.significance->t) << ',' << s.significance->df << ',' << fmt(s.significance->p_t) << ','
         << fmt(s.significance->empirical_p);
    else
      os << ",,,,";
    os << '\n';
  }
  return os.str();
}

std::string to_csv_text(const LayerTimeResult& r) {
  std::ostringstream os;
  os << "layer_index,layer_name,window_start_ms,window_end_ms,rho\n";
  for (Index l = 0; l < r.mean_grid.rows(); ++l)
    for (Index w = 0; w < r.mean_grid.cols(); ++w)
      os << l << ',' << (l < static_cast<Index>(r.layer_names.size()) ? r.layer_names[static_cast<std::size_t>(l)] : "")
         << ',' << fmt(r.windows[static_cast<std::size_t>(w)].first) << ','
         << fmt(r.windows[static_cast<std::size_t>(w)].second) << ',' << fmt(r.mean_grid(l, w)) << '\n';
  return os.str();
}

std::string to_csv_text(const TopoResult& r) {
  std::ostringstream os;
  os << "channel,region,window_start_ms,window_end_ms,r\n";
  for (std::size_t c = 0; c < r.channel_names.size(); ++c)
    for (std::size_t w = 0; w < r.windows.size(); ++w)
      os << r.channel_names[c] << ',' << to_string(r.channel_regions[c]) << ',' << fmt(r.windows[w].first) << ','
         << fmt(r.windows[w].second) << ',' << fmt(r.r(static_cast<Index>(c), static_cast<Index>(w))) << '\n';
  return os.str();
}

std::string to_csv_text(const CategoryResult& r) {
  std::ostringstream os;
  os << "category,n,scored,mean,std\n";
  for (const auto& c : r.categories)
    os << c.category << ',' << c.n << ',' << (c.scored ? "true" : "false") << ',' << (c.scored ? fmt(c.mean) : "")
       << ',' << fmt(c.std) << '\n';
  return os.str();
}

std::string to_csv_text(const BenchmarkResult& r) {
  std::ostringstream os;
  os << "task,n,slope,intercept,r_squared,p_value\n";
  for (const auto& t : r.tasks)
    os << t.task << ',' << t.regression.n << ',' << fmt(t.regression.slope) << ',' << fmt(t.regression.intercept)
       << ',' << fmt(t.regression.r_squared) << ',' << fmt(t.regression.p_value) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// SVG

std::string to_svg_text(const TopoResult& r) {
  constexpr double kSize = 400.0, kRadius = 12.0;
  const Vector channel_mean = r.r.rowwise().mean();
  const double limit = channel_mean.size() ? channel_mean.cwiseAbs().maxCoeff() : 0.0;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize << "\" viewBox=\"0 0 "
     << kSize << ' ' << kSize << "\">\n";
  os << "<title>" << xml_escape(r.model_id) << " channel correlations</title>\n";
  os << "<ellipse cx=\"200\" cy=\"200\" rx=\"180\" ry=\"180\" fill=\"none\" stroke=\"#444\"/>\n";
  for (const auto& e : r.montage.entries) {
    const auto it = std::find(r.channel_names.begin(), r.channel_names.end(), e.channel);
    const bool has_value = it != r.channel_names.end();
    const double v = has_value ? channel_mean(static_cast<Index>(it - r.channel_names.begin())) : 0.0;
    const double cx = kSize / 2 + e.x * 180.0, cy = kSize / 2 - e.y * 180.0;
    os << "<circle cx=\"" << fmt(cx) << "\" cy=\"" << fmt(cy) << "\" r=\"" << kRadius << "\" fill=\""
       << (has_value ? fill_colour(v, limit) : std::string("#dddddd")) << "\" stroke=\"#222\" data-channel=\""
       << xml_escape(e.channel) << "\" data-r=\"" << (has_value ? fmt(v) : "") << "\"><title>" << xml_escape(e.channel)
       << "</title></circle>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string to_svg_text(const LayerTimeResult& r) {
  constexpr double kCell = 30.0, kMargin = 80.0;
  const double limit = r.mean_grid.size() ? r.mean_grid.cwiseAbs().maxCoeff() : 0.0;
  const double width = kMargin + kCell * static_cast<double>(r.mean_grid.cols()) + 10;
  const double height = 40 + kCell * static_cast<double>(r.mean_grid.rows()) + 10;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  os << "<title>" << xml_escape(r.model_id) << " layer x time</title>\n";
  for (Index w = 0; w < r.mean_grid.cols(); ++w)
    os << "<text x=\"" << kMargin + kCell * static_cast<double>(w) + 2 << "\" y=\"30\" font-size=\"9\">"
       << fmt(r.windows[static_cast<std::size_t>(w)].first) << "</text>\n";
  for (Index l = 0; l < r.mean_grid.rows(); ++l) {
    const std::string name =
        l < static_cast<Index>(r.layer_names.size()) ? r.layer_names[static_cast<std::size_t>(l)] : std::to_string(l);
    os << "<text x=\"2\" y=\"" << 40 + kCell * static_cast<double>(l) + 19 << "\" font-size=\"10\">" << xml_escape(name)
       << "</text>\n";
    for (Index w = 0; w < r.mean_grid.cols(); ++w)
      os << "<rect x=\"" << kMargin + kCell * static_cast<double>(w) << "\" y=\"" << 40 + kCell * static_cast<double>(l)
         << "\" width=\"" << kCell << "\" height=\"" << kCell << "\" fill=\"" << fill_colour(r.mean_grid(l, w), limit)
         << "\" data-layer=\"" << l << "\" data-window=\"" << w << "\" data-rho=\"" << fmt(r.mean_grid(l, w))
         << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Export dispatch

namespace {

template <typename Result>
concept HasCsv = requires(const Result& r) { to_csv_text(r); };
template <typename Result>
concept HasSvg = requires(const Result& r) { to_svg_text(r); };

}  // namespace

template <typename Result>
void export_report(const Result& result, const std::filesystem::path& path, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json:
      write_text(path, to_json_text(result));
      return;
    case ReportFormat::Csv:
      if constexpr (HasCsv<Result>) {
        write_text(path, to_csv_text(result));
        return;
      }
      break;
    case ReportFormat::Svg:
      if constexpr (HasSvg<Result>) {
        write_text(path, to_svg_text(result));
        return;
      }
      break;
  }
  throw parameter_error(std::string("this result type cannot be exported as ") + (extension(format) + 1));
}

template void export_report(const AlignmentReport&, const std::filesystem::path&, ReportFormat);
template void export_report(const LayerTimeResult&, const std::filesystem::path&, ReportFormat);
template void export_report(const TopoResult&, const std::filesystem::path&, ReportFormat);
template void export_report(const CategoryResult&, const std::filesystem::path&, ReportFormat);
template void export_report(const BenchmarkResult&, const std::filesystem::path&, ReportFormat);
template void export_report(const RdmResult&, const std::filesystem::path&, ReportFormat);

}  // namespace brainalign
