#include "brainalign/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <unordered_set>

#include "brainalign/log.hpp"
#include "json.hpp"

namespace brainalign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Error invalid(const std::string& code, const std::string& message) {
  return Error(ErrorKind::Validation, code, message);
}

bool all_finite(const RowMatrix& m) { return m.allFinite(); }

template <typename T>
std::optional<std::string> first_duplicate(const std::vector<T>& values) {
  std::unordered_set<T> seen;
  for (const auto& v : values)
    if (!seen.insert(v).second) return v;
  return std::nullopt;
}

}  // namespace

void EEGEpochs::validate() const {
  if (static_cast<Index>(channel_names.size()) != n_channels)
    throw invalid("SHAPE_MISMATCH", "epochs: channel_names has " + std::to_string(channel_names.size()) +
                                        " entries for " + std::to_string(n_channels) + " channels");
  if (static_cast<Index>(stimulus_ids.size()) != n_trials())
    throw invalid("SHAPE_MISMATCH", "epochs: stimulus_ids length differs from trial count");
  if (static_cast<Index>(repetition_index.size()) != n_trials())
    throw invalid("SHAPE_MISMATCH", "epochs: repetition_index length differs from trial count");
  if (data.cols() != n_channels * n_times)
    throw invalid("SHAPE_MISMATCH", "epochs: data columns != n_channels * n_times");
  if (!(sfreq > 0.0) || !(t_end_ms > t_start_ms))
    throw invalid("INVALID_VALUE", "epochs: need sfreq > 0 and t_end_ms > t_start_ms");
  const auto expected = static_cast<Index>(std::llround((t_end_ms - t_start_ms) / 1000.0 * sfreq));
  if (expected != n_times)
    throw invalid("SHAPE_MISMATCH", "epochs: n_times = " + std::to_string(n_times) + " but epoch window and sfreq imply " +
                                        std::to_string(expected));
  for (int r : repetition_index)
    if (r < 0) throw invalid("INVALID_VALUE", "epochs: negative repetition_index");
  if (!all_finite(data)) throw invalid("NONFINITE", "epochs: non-finite sample");
}

void FeatureTensor::validate() const {
  if (n_layers < 1) throw invalid("SHAPE_MISMATCH", "features " + model_id + ": need at least one layer");
  if (data.cols() != n_layers * dim) throw invalid("SHAPE_MISMATCH", "features " + model_id + ": data columns != n_layers * dim");
  if (static_cast<Index>(stimulus_ids.size()) != n_stimuli())
    throw invalid("SHAPE_MISMATCH", "features " + model_id + ": stimulus_ids length differs from row count");
  if (static_cast<Index>(layer_names.size()) != n_layers)
    throw invalid("SHAPE_MISMATCH", "features " + model_id + ": layer_names length differs from layer count");
  if (auto dup = first_duplicate(stimulus_ids))
    throw invalid("DUPLICATE_ID", "features " + model_id + ": duplicate stimulus_id " + *dup);
  if (!all_finite(data)) throw invalid("NONFINITE", "features " + model_id + ": non-finite value");
}

const FeatureTensor& Dataset::model(const std::string& model_id) const {
  for (const auto& f : features)
    if (f.model_id == model_id) return f;
  throw Error(ErrorKind::Config, "UNKNOWN_MODEL", "dataset has no features for model '" + model_id + "'");
}

std::vector<Index> match_rows(const FeatureTensor& features, const std::vector<std::string>& ids) {
  std::unordered_map<std::string, Index> row_of;
  row_of.reserve(features.stimulus_ids.size());
  for (std::size_t i = 0; i < features.stimulus_ids.size(); ++i)
    row_of.emplace(features.stimulus_ids[i], static_cast<Index>(i));
  std::vector<Index> rows;
  rows.reserve(ids.size());
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    auto it = row_of.find(id);
    if (it == row_of.end()) missing.push_back(id);
    else rows.push_back(it->second);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 10) list += ", ... (" + std::to_string(missing.size()) + " total)";
    throw Error(ErrorKind::Alignment, "ID_MISMATCH",
                "features " + features.model_id + " lack stimulus ids: " + list);
  }
  return rows;
}

void save_epochs(const EEGEpochs& epochs, const fs::path& path, NpyDtype dtype) {
  NpyArray a;
  a.dtype = dtype;
  a.shape = {static_cast<std::size_t>(epochs.n_trials()), static_cast<std::size_t>(epochs.n_channels),
             static_cast<std::size_t>(epochs.n_times)};
  a.values.assign(epochs.data.data(), epochs.data.data() + epochs.data.size());
  save_npy(a, path);
}

void save_features(const FeatureTensor& features, const fs::path& path, NpyDtype dtype) {
  NpyArray a;
  a.dtype = dtype;
  a.shape = {static_cast<std::size_t>(features.n_stimuli()), static_cast<std::size_t>(features.n_layers),
             static_cast<std::size_t>(features.dim)};
  a.values.assign(features.data.data(), features.data.data() + features.data.size());
  save_npy(a, path);
}

void Manifest::write(const fs::path& path) const {
  json j;
  j["version"] = version;
  j["dtype"] = to_descr(dtype);
  j["sfreq"] = sfreq;
  j["t_start_ms"] = t_start_ms;
  j["t_end_ms"] = t_end_ms;
  j["channel_names"] = channel_names;
  j["subjects"] = json::array();
  for (const auto& s : subjects) {
    json e{{"subject_id", s.subject_id}, {"eeg_path", s.eeg_path}, {"stimulus_ids", s.stimulus_ids},
           {"repetition_index", s.repetition_index}};
    if (s.sfreq) e["sfreq"] = *s.sfreq;
    if (s.channel_names) e["channel_names"] = *s.channel_names;
    j["subjects"].push_back(std::move(e));
  }
  j["features"] = json::array();
  for (const auto& f : features)
    j["features"].push_back(
        {{"model_id", f.model_id}, {"path", f.path}, {"layer_names", f.layer_names}, {"stimulus_ids", f.stimulus_ids}});
  if (montage_path) j["montage_path"] = *montage_path;
  if (categories_path) j["categories_path"] = *categories_path;
  if (categories) j["categories"] = *categories;
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "IO", "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

namespace {

// Walks a manifest collecting issues; produces a Dataset only when none
// were found, so validate_manifest and load_dataset cannot disagree.
class Loader {
 public:
  explicit Loader(fs::path manifest_path)
      : manifest_path_(std::move(manifest_path)), root_(manifest_path_.parent_path()) {}

  std::vector<ValidationIssue> issues;

  std::optional<Dataset> run() {
    std::ifstream in(manifest_path_);
    if (!in) throw Error(ErrorKind::Io, "IO", "cannot read manifest " + manifest_path_.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      add("PARSE_ERROR", std::string("manifest is not valid JSON: ") + e.what());
      return std::nullopt;
    }
    if (!j.is_object()) {
      add("PARSE_ERROR", "manifest root must be a JSON object");
      return std::nullopt;
    }

    static const std::set<std::string> kKnown = {"version", "dtype", "sfreq", "t_start_ms", "t_end_ms",
                                                 "channel_names", "subjects", "features", "montage_path",
                                                 "categories_path", "categories"};
    for (const auto& [key, _] : j.items())
      if (!kKnown.count(key)) log::warn("manifest: ignoring unknown key '" + key + "'");

    Dataset ds;
    ds.root = root_;
    Manifest& m = ds.manifest;
    m.version = get<std::string>(j, "version", "manifest").value_or("");
    if (auto dtype = get<std::string>(j, "dtype", "manifest")) {
      try {
        m.dtype = dtype_from_descr(*dtype);
      } catch (const Error& e) {
        add(e.code(), "manifest dtype: " + std::string(e.what()));
      }
    }
    m.sfreq = get<double>(j, "sfreq", "manifest").value_or(0.0);
    m.t_start_ms = get<double>(j, "t_start_ms", "manifest").value_or(0.0);
    m.t_end_ms = get<double>(j, "t_end_ms", "manifest").value_or(0.0);
    m.channel_names = get<std::vector<std::string>>(j, "channel_names", "manifest").value_or(std::vector<std::string>{});
    if (j.contains("sfreq") && !(m.sfreq > 0.0)) add("INVALID_VALUE", "manifest: sfreq must be positive");
    if (j.contains("t_end_ms") && !(m.t_end_ms > m.t_start_ms))
      add("INVALID_VALUE", "manifest: t_end_ms must exceed t_start_ms");
    if (j.contains("montage_path")) m.montage_path = get<std::string>(j, "montage_path", "manifest");
    if (j.contains("categories_path")) m.categories_path = get<std::string>(j, "categories_path", "manifest");
    if (j.contains("categories")) m.categories = get<std::vector<std::string>>(j, "categories", "manifest");

    parse_subjects(j, m);
    parse_features(j, m);
    if (!issues.empty()) return std::nullopt;

    load_subjects(ds);
    load_features(ds);
    cross_check(ds);
    load_montage(ds);
    load_categories(ds);
    if (!issues.empty()) return std::nullopt;
    return ds;
  }

 private:
  void add(const std::string& code, const std::string& message) { issues.push_back({code, message}); }

  template <typename T>
  std::optional<T> get(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) {
      add("MISSING_FIELD", where + ": missing '" + key + "'");
      return std::nullopt;
    }
    try {
      return obj.at(key).get<T>();
    } catch (const json::exception&) {
      add("INVALID_VALUE", where + ": '" + key + "' has the wrong type");
      return std::nullopt;
    }
  }

  fs::path resolve(const std::string& p) const {
    fs::path path(p);
    return path.is_absolute() ? path : root_ / path;
  }

  void parse_subjects(const json& j, Manifest& m) {
    if (!j.contains("subjects") || !j["subjects"].is_array() || j["subjects"].empty()) {
      add("MISSING_FIELD", "manifest: 'subjects' must be a non-empty array");
      return;
    }
    std::set<std::string> ids;
    for (std::size_t i = 0; i < j["subjects"].size(); ++i) {
      const auto& e = j["subjects"][i];
      const std::string where = "subjects[" + std::to_string(i) + "]";
      if (!e.is_object()) {
        add("INVALID_VALUE", where + " must be an object");
        continue;
      }
      SubjectEntry s;
      s.subject_id = get<std::string>(e, "subject_id", where).value_or("");
      s.eeg_path = get<std::string>(e, "eeg_path", where).value_or("");
      s.stimulus_ids = get<std::vector<std::string>>(e, "stimulus_ids", where).value_or(std::vector<std::string>{});
      if (e.contains("repetition_index"))
        s.repetition_index = get<std::vector<int>>(e, "repetition_index", where).value_or(std::vector<int>{});
      else
        s.repetition_index.assign(s.stimulus_ids.size(), 0);
      if (e.contains("sfreq")) s.sfreq = get<double>(e, "sfreq", where);
      if (e.contains("channel_names")) s.channel_names = get<std::vector<std::string>>(e, "channel_names", where);
      if (s.sfreq && *s.sfreq != m.sfreq)
        add("SFREQ_MISMATCH", where + " (" + s.subject_id + "): sfreq " + std::to_string(*s.sfreq) +
                                  " differs from manifest sfreq " + std::to_string(m.sfreq));
      if (!s.subject_id.empty() && !ids.insert(s.subject_id).second)
        add("DUPLICATE_ID", where + ": duplicate subject_id " + s.subject_id);
      m.subjects.push_back(std::move(s));
    }
  }

  void parse_features(const json& j, Manifest& m) {
    if (!j.contains("features") || !j["features"].is_array() || j["features"].empty()) {
      add("MISSING_FIELD", "manifest: 'features' must be a non-empty array");
      return;
    }
    std::set<std::string> ids;
    for (std::size_t i = 0; i < j["features"].size(); ++i) {
      const auto& e = j["features"][i];
      const std::string where = "features[" + std::to_string(i) + "]";
      if (!e.is_object()) {
        add("INVALID_VALUE", where + " must be an object");
        continue;
      }
      FeatureEntry f;
      f.model_id = get<std::string>(e, "model_id", where).value_or("");
      f.path = get<std::string>(e, "path", where).value_or("");
      f.layer_names = get<std::vector<std::string>>(e, "layer_names", where).value_or(std::vector<std::string>{});
      f.stimulus_ids = get<std::vector<std::string>>(e, "stimulus_ids", where).value_or(std::vector<std::string>{});
      if (!f.model_id.empty() && !ids.insert(f.model_id).second)
        add("DUPLICATE_ID", where + ": duplicate model_id " + f.model_id);
      if (auto dup = first_duplicate(f.stimulus_ids))
        add("DUPLICATE_ID", where + " (" + f.model_id + "): duplicate stimulus_id " + *dup);
      m.features.push_back(std::move(f));
    }
  }

  std::optional<NpyArray> read_tensor(const std::string& rel, const std::string& where) {
    const fs::path path = resolve(rel);
    if (!fs::exists(path)) {
      add("MISSING_FILE", where + ": file not found: " + rel);
      return std::nullopt;
    }
    try {
      return load_npy(path);
    } catch (const Error& e) {
      add(e.code(), where + ": " + e.what());
      return std::nullopt;
    }
  }

  void load_subjects(Dataset& ds) {
    const Manifest& m = ds.manifest;
    for (const auto& s : m.subjects) {
      const std::string where = "subject " + s.subject_id + " eeg_path";
      auto arr = read_tensor(s.eeg_path, where);
      if (!arr) continue;
      if (arr->dtype != m.dtype) {
        add("DTYPE_MISMATCH", where + ": tensor dtype " + to_descr(arr->dtype) + " differs from manifest dtype " +
                                  to_descr(m.dtype));
        continue;
      }
      if (arr->ndim() != 3) {
        add("SHAPE_MISMATCH", where + ": expected a 3-D (trials, channels, times) tensor");
        continue;
      }
      EEGEpochs ep;
      ep.n_channels = static_cast<Index>(arr->shape[1]);
      ep.n_times = static_cast<Index>(arr->shape[2]);
      ep.data = Eigen::Map<const RowMatrix>(arr->values.data(), static_cast<Index>(arr->shape[0]),
                                            ep.n_channels * ep.n_times);
      ep.channel_names = s.channel_names.value_or(m.channel_names);
      ep.sfreq = s.sfreq.value_or(m.sfreq);
      ep.t_start_ms = m.t_start_ms;
      ep.t_end_ms = m.t_end_ms;
      ep.stimulus_ids = s.stimulus_ids;
      ep.repetition_index = s.repetition_index;
      try {
        ep.validate();
      } catch (const Error& e) {
        add(e.code(), "subject " + s.subject_id + ": " + e.what());
        continue;
      }
      ds.subjects.push_back({s.subject_id, std::move(ep)});
    }
  }

  void load_features(Dataset& ds) {
    for (const auto& f : ds.manifest.features) {
      const std::string where = "features " + f.model_id + " path";
      auto arr = read_tensor(f.path, where);
      if (!arr) continue;
      if (arr->dtype != ds.manifest.dtype) {
        add("DTYPE_MISMATCH", where + ": tensor dtype " + to_descr(arr->dtype) + " differs from manifest dtype " +
                                  to_descr(ds.manifest.dtype));
        continue;
      }
      if (arr->ndim() != 3) {
        add("SHAPE_MISMATCH", where + ": expected a 3-D (stimuli, layers, dim) tensor");
        continue;
      }
      FeatureTensor ft;
      ft.n_layers = static_cast<Index>(arr->shape[1]);
      ft.dim = static_cast<Index>(arr->shape[2]);
      ft.data = Eigen::Map<const RowMatrix>(arr->values.data(), static_cast<Index>(arr->shape[0]), ft.n_layers * ft.dim);
      ft.model_id = f.model_id;
      ft.layer_names = f.layer_names;
      ft.stimulus_ids = f.stimulus_ids;
      try {
        ft.validate();
      } catch (const Error& e) {
        add(e.code(), e.what());
        continue;
      }
      ds.features.push_back(std::move(ft));
    }
  }

  void cross_check(const Dataset& ds) {
    for (const auto& subject : ds.subjects) {
      for (const auto& ft : ds.features) {
        try {
          match_rows(ft, subject.epochs.stimulus_ids);
        } catch (const Error& e) {
          add("ID_MISMATCH", "subject " + subject.subject_id + ": " + e.what());
        }
      }
    }
  }

  void load_montage(Dataset& ds) {
    if (!ds.manifest.montage_path) return;
    const fs::path path = resolve(*ds.manifest.montage_path);
    if (!fs::exists(path)) {
      add("MISSING_FILE", "montage_path: file not found: " + *ds.manifest.montage_path);
      return;
    }
    try {
      ds.montage = Montage::read_csv(path);
    } catch (const Error& e) {
      add(e.code(), std::string("montage_path: ") + e.what());
    }
  }

  void load_categories(Dataset& ds) {
    if (!ds.manifest.categories_path) return;
    const fs::path path = resolve(*ds.manifest.categories_path);
    if (!fs::exists(path)) {
      add("MISSING_FILE", "categories_path: file not found: " + *ds.manifest.categories_path);
      return;
    }
    try {
      ds.categories = CategoryLabels::read_csv(path);
    } catch (const Error& e) {
      add(e.code(), std::string("categories_path: ") + e.what());
      return;
    }
    if (ds.manifest.categories) {
      const std::set<std::string> declared(ds.manifest.categories->begin(), ds.manifest.categories->end());
      for (const auto& c : ds.categories->categories)
        if (!declared.count(c)) add("UNKNOWN_CATEGORY", "categories_path: category '" + c + "' is not declared");
      ds.categories->categories = *ds.manifest.categories;
    }
    std::unordered_set<std::string> stimuli;
    for (const auto& ft : ds.features) stimuli.insert(ft.stimulus_ids.begin(), ft.stimulus_ids.end());
    for (const auto& s : ds.subjects) stimuli.insert(s.epochs.stimulus_ids.begin(), s.epochs.stimulus_ids.end());
    std::set<std::string> unknown;
    for (const auto& [id, _] : ds.categories->by_stimulus)
      if (!stimuli.count(id)) unknown.insert(id);
    if (!unknown.empty())
      add("UNKNOWN_STIMULUS", "categories_path: stimulus '" + *unknown.begin() + "' is not in the dataset (" +
                                  std::to_string(unknown.size()) + " unknown)");
  }

  fs::path manifest_path_;
  fs::path root_;
};

}  // namespace

std::vector<ValidationIssue> validate_manifest(const fs::path& manifest_path) {
  Loader loader(manifest_path);
  loader.run();
  return loader.issues;
}

Dataset load_dataset(const fs::path& manifest_path) {
  Loader loader(manifest_path);
  auto ds = loader.run();
  if (!ds) {
    std::string message = "cannot load " + manifest_path.string() + ":";
    for (const auto& issue : loader.issues) message += "\n  [" + issue.code + "] " + issue.message;
    throw Error(ErrorKind::Load, loader.issues.front().code, message);
  }
  return std::move(*ds);
}

}  // namespace brainalign
