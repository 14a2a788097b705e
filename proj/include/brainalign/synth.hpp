#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "brainalign/core.hpp"
#include "brainalign/dataset.hpp"

namespace brainalign {

struct LinearDataset {
  Matrix x;       // n × d_in, standard normal
  Matrix y;       // n × d_out
  Matrix b_true;  // d_in × d_out
};

/// Y = X B + ε. Columns of B are rescaled so each column of X B has unit
/// sample variance; ε has variance 1/snr (snr = +inf: no noise; snr = 0:
/// B = 0 and unit-variance noise). Draw order: X, B, ε, each row-major.
LinearDataset gen_linear_dataset(Index n, Index d_in, Index d_out, double snr, std::uint64_t seed);

struct SynthCategory {
  std::string name;
  std::optional<double> snr;  // overrides SynthSpec::snr for its stimuli
};

struct SynthSpec {
  Index n_stimuli = 120;
  int n_repetitions = 4;
  std::vector<std::string> channel_names = default_channels();
  double sfreq = 100.0;
  double epoch_ms = 500.0;  // epochs span [0, epoch_ms)
  Index n_layers = 4;
  Index dim = 16;
  double snr = 2.0;  // per-repetition signal-to-noise power ratio
  Index planted_layer = 2;
  std::pair<double, double> planted_window{100.0, 200.0};
  std::vector<std::string> planted_channels;  // empty: all channels of planted_region
  Region planted_region = Region::Occipital;
  std::vector<SynthCategory> categories;  // stimuli assigned round-robin
  std::string model_id = "synth-model";
  std::uint64_t seed = 0;

  static std::vector<std::string> default_channels();
  std::vector<std::string> resolved_planted_channels() const;
  void validate() const;
};

struct StructuredDataset {
  EEGEpochs epochs;  // all repetitions, repetition-major trial order
  FeatureTensor features;
  Montage montage;
  std::optional<CategoryLabels> categories;
};

/// Random features per layer; EEG is unit white noise except on the planted
/// channels inside the planted window, where each channel adds
/// sqrt(snr) · (planted-layer features · w_c), w_c random and the readout
/// scaled to unit variance. Repetitions share the signal, not the noise.
/// When `features` is given it replaces the random features.
StructuredDataset gen_structured_epochs(const SynthSpec& spec, const FeatureTensor* features = nullptr);

/// Writes manifest.json, eeg/features NPY tensors, montage.csv and (when
/// categories exist) categories.csv into `dir`. Returns the manifest path.
std::filesystem::path write_synth_dataset(const SynthSpec& spec, const std::filesystem::path& dir,
                                          int n_subjects = 1, NpyDtype dtype = NpyDtype::F8);

/// Spearman (explicit mid-ranks, then Pearson) and tau-b (full pair
/// enumeration) straight from the definitions; length capped at 12.
std::pair<std::optional<double>, std::optional<double>> rank_oracle(const Vector& x, const Vector& y);

}  // namespace brainalign
