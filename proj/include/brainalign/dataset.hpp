#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "brainalign/core.hpp"
#include "brainalign/npy.hpp"

namespace brainalign {

/// Stimulus-locked EEG, one row per trial. Columns are channel-major:
/// column (c * n_times + t) holds channel c at sample t.
struct EEGEpochs {
  RowMatrix data;
  Index n_channels = 0;
  Index n_times = 0;
  std::vector<std::string> channel_names;
  double sfreq = 0.0;
  double t_start_ms = 0.0;
  double t_end_ms = 0.0;
  std::vector<std::string> stimulus_ids;
  std::vector<int> repetition_index;

  Index n_trials() const noexcept { return data.rows(); }
  double sample(Index trial, Index channel, Index t) const { return data(trial, channel * n_times + t); }
  /// Onset-relative time of sample t in milliseconds.
  double time_ms(Index t) const noexcept { return t_start_ms + 1000.0 * static_cast<double>(t) / sfreq; }

  /// Throws Error(Validation) naming the broken invariant.
  void validate() const;
};

/// Layer-wise stimulus features for one model. Columns are layer-major:
/// layer l occupies columns [l * dim, (l + 1) * dim).
struct FeatureTensor {
  RowMatrix data;
  Index n_layers = 0;
  Index dim = 0;
  std::string model_id;
  std::vector<std::string> layer_names;
  std::vector<std::string> stimulus_ids;

  Index n_stimuli() const noexcept { return data.rows(); }
  auto layer(Index l) const { return data.middleCols(l * dim, dim); }

  void validate() const;
};

enum class Region { Frontal, Central, Parietal, Occipital, Other };
inline constexpr Region kScoredRegions[] = {Region::Frontal, Region::Central, Region::Parietal,
                                            Region::Occipital};

const char* to_string(Region region) noexcept;
Region region_from_string(const std::string& name);
/// 10-20 naming rule: Fp*/AF*/F* frontal, FC*/C* central, CP*/P* parietal,
/// PO*/O* occipital, T*/FT*/TP* (and anything unrecognised) other.
Region region_from_channel_name(const std::string& channel);

struct MontageEntry {
  std::string channel;
  double x = 0.0;  // left (-1) to right (+1)
  double y = 0.0;  // posterior (-1) to anterior (+1)
  Region region = Region::Other;
};

struct Montage {
  std::vector<MontageEntry> entries;  // file order

  const MontageEntry* find(const std::string& channel) const;
  void validate() const;

  /// Standard 10-20/10-10 positions for common channel names.
  static Montage builtin();
  static Montage read_csv(const std::filesystem::path& path);  // channel,x,y,region
  void write_csv(const std::filesystem::path& path) const;
};

struct CategoryLabels {
  std::vector<std::string> categories;  // declared set, first-appearance order
  std::unordered_map<std::string, std::string> by_stimulus;

  static CategoryLabels read_csv(const std::filesystem::path& path);  // stimulus_id,category
  void write_csv(const std::filesystem::path& path, const std::vector<std::string>& id_order) const;
};

struct SubjectEntry {
  std::string subject_id;
  std::string eeg_path;
  std::vector<std::string> stimulus_ids;
  std::vector<int> repetition_index;
  std::optional<double> sfreq;
  std::optional<std::vector<std::string>> channel_names;
};

struct FeatureEntry {
  std::string model_id;
  std::string path;
  std::vector<std::string> layer_names;
  std::vector<std::string> stimulus_ids;
};

struct Manifest {
  std::string version = "1.0";
  std::vector<SubjectEntry> subjects;
  std::vector<FeatureEntry> features;
  std::optional<std::string> montage_path;
  std::optional<std::string> categories_path;
  std::optional<std::vector<std::string>> categories;  // declared category set
  std::vector<std::string> channel_names;
  double sfreq = 0.0;
  double t_start_ms = 0.0;
  double t_end_ms = 0.0;
  NpyDtype dtype = NpyDtype::F4;

  void write(const std::filesystem::path& path) const;
};

struct Subject {
  std::string subject_id;
  EEGEpochs epochs;
};

struct Dataset {
  std::filesystem::path root;
  Manifest manifest;
  std::vector<Subject> subjects;
  std::vector<FeatureTensor> features;
  std::optional<Montage> montage;
  std::optional<CategoryLabels> categories;

  const FeatureTensor& model(const std::string& model_id) const;
};

struct ValidationIssue {
  std::string code;  // e.g. MISSING_FILE, UNSUPPORTED_DTYPE, DUPLICATE_ID, ID_MISMATCH
  std::string message;
};

/// Collects every problem that would stop load_dataset. Unreadable manifest
/// is an Io error, not an issue.
std::vector<ValidationIssue> validate_manifest(const std::filesystem::path& manifest_path);

/// All-or-nothing load; throws Error(Load) carrying the first issue's code.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes epochs (trials × channels × times) and features (stimuli × layers × dim).
void save_epochs(const EEGEpochs& epochs, const std::filesystem::path& path, NpyDtype dtype);
void save_features(const FeatureTensor& features, const std::filesystem::path& path, NpyDtype dtype);

/// Row indices of `ids` inside `features`; throws Error(Alignment) listing
/// the missing ids.
std::vector<Index> match_rows(const FeatureTensor& features, const std::vector<std::string>& ids);

}  // namespace brainalign
