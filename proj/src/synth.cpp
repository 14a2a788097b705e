#include "brainalign/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "brainalign/metrics.hpp"
#include "brainalign/rng.hpp"

namespace brainalign {

namespace fs = std::filesystem;

LinearDataset gen_linear_dataset(Index n, Index d_in, Index d_out, double snr, std::uint64_t seed) {
  if (n < 1 || d_in < 1 || d_out < 1) throw parameter_error("gen_linear_dataset: sizes must be >= 1");
  if (!(snr >= 0.0)) throw parameter_error("gen_linear_dataset: snr must be >= 0");
  Rng rng(seed);
  LinearDataset ds;
  ds.x = rng.normal_matrix(n, d_in);
  ds.b_true = rng.normal_matrix(d_in, d_out);
  const Matrix noise = rng.normal_matrix(n, d_out);
  if (snr == 0.0) {
    ds.b_true.setZero();
    ds.y = noise;
    return ds;
  }
  Matrix signal = ds.x * ds.b_true;
  if (n >= 2) {
    for (Index j = 0; j < d_out; ++j) {
      const double mean = signal.col(j).mean();
      const double sd = std::sqrt((signal.col(j).array() - mean).square().sum() / static_cast<double>(n - 1));
      if (sd > 0.0) {
        ds.b_true.col(j) /= sd;
        signal.col(j) /= sd;
      }
    }
  }
  ds.y = std::isinf(snr) ? signal : Matrix(signal + noise / std::sqrt(snr));
  return ds;
}

std::vector<std::string> SynthSpec::default_channels() {
  return {"Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "FC1", "FC2", "C3", "Cz", "C4",
          "CP1", "CP2", "P7", "P3", "Pz", "P4", "P8", "PO3", "PO4", "O1", "Oz", "O2"};
}

std::vector<std::string> SynthSpec::resolved_planted_channels() const {
  if (!planted_channels.empty()) return planted_channels;
  std::vector<std::string> out;
  for (const auto& c : channel_names)
    if (region_from_channel_name(c) == planted_region) out.push_back(c);
  return out;
}

void SynthSpec::validate() const {
  if (n_stimuli < 2 || n_repetitions < 1 || channel_names.empty() || n_layers < 1 || dim < 1)
    throw parameter_error("synth spec: sizes must be positive (n_stimuli >= 2)");
  if (!(sfreq > 0.0) || !(epoch_ms > 0.0)) throw parameter_error("synth spec: sfreq and epoch_ms must be positive");
  if (!(snr >= 0.0)) throw parameter_error("synth spec: snr must be >= 0");
  if (planted_layer < 0 || planted_layer >= n_layers) throw parameter_error("synth spec: planted_layer out of range");
  if (!(planted_window.first >= 0.0 && planted_window.second <= epoch_ms && planted_window.second > planted_window.first))
    throw parameter_error("synth spec: planted_window outside the epoch");
  for (const auto& c : resolved_planted_channels())
    if (std::find(channel_names.begin(), channel_names.end(), c) == channel_names.end())
      throw parameter_error("synth spec: planted channel " + c + " is not a listed channel");
  for (const auto& c : categories)
    if (c.snr && !(*c.snr >= 0.0)) throw parameter_error("synth spec: category snr must be >= 0");
}

StructuredDataset gen_structured_epochs(const SynthSpec& spec, const FeatureTensor* features) {
  spec.validate();
  Rng rng(spec.seed);
  StructuredDataset out;

  std::vector<std::string> ids(static_cast<std::size_t>(spec.n_stimuli));
  for (Index s = 0; s < spec.n_stimuli; ++s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "stim-%05lld", static_cast<long long>(s));
    ids[static_cast<std::size_t>(s)] = buf;
  }

  FeatureTensor& ft = out.features;
  if (features) {
    ft = *features;
    if (ft.n_stimuli() != spec.n_stimuli || ft.n_layers != spec.n_layers || ft.dim != spec.dim)
      throw parameter_error("gen_structured_epochs: supplied features do not match the spec");
    ids = ft.stimulus_ids;
  } else {
    ft.model_id = spec.model_id;
    ft.n_layers = spec.n_layers;
    ft.dim = spec.dim;
    ft.stimulus_ids = ids;
    ft.data.resize(spec.n_stimuli, spec.n_layers * spec.dim);
    for (Index l = 0; l < spec.n_layers; ++l) {
      ft.data.middleCols(l * spec.dim, spec.dim) = rng.normal_matrix(spec.n_stimuli, spec.dim);
      ft.layer_names.push_back("layer_" + std::to_string(l));
    }
  }

  // Per-stimulus signal power.
  Vector stim_snr = Vector::Constant(spec.n_stimuli, spec.snr);
  if (!spec.categories.empty()) {
    CategoryLabels labels;
    for (const auto& c : spec.categories) labels.categories.push_back(c.name);
    for (Index s = 0; s < spec.n_stimuli; ++s) {
      const auto& cat = spec.categories[static_cast<std::size_t>(s) % spec.categories.size()];
      labels.by_stimulus[ids[static_cast<std::size_t>(s)]] = cat.name;
      if (cat.snr) stim_snr(s) = *cat.snr;
    }
    out.categories = std::move(labels);
  }

  const auto planted = spec.resolved_planted_channels();
  const auto n_channels = static_cast<Index>(spec.channel_names.size());
  Matrix readout = Matrix::Zero(spec.n_stimuli, n_channels);
  const Matrix layer = ft.layer(spec.planted_layer);
  for (Index c = 0; c < n_channels; ++c) {
    const auto& name = spec.channel_names[static_cast<std::size_t>(c)];
    if (std::find(planted.begin(), planted.end(), name) == planted.end()) continue;
    const Matrix w = rng.normal_matrix(spec.dim, 1);
    Vector s = layer * w;
    s.array() -= s.mean();
    const double sd = std::sqrt(s.squaredNorm() / static_cast<double>(std::max<Index>(1, s.size() - 1)));
    if (sd > 0.0) s /= sd;
    readout.col(c) = s.cwiseProduct(stim_snr.cwiseSqrt());
  }

  EEGEpochs& ep = out.epochs;
  ep.channel_names = spec.channel_names;
  ep.sfreq = spec.sfreq;
  ep.t_start_ms = 0.0;
  ep.t_end_ms = spec.epoch_ms;
  ep.n_channels = n_channels;
  ep.n_times = static_cast<Index>(std::llround(spec.epoch_ms / 1000.0 * spec.sfreq));
  const Index n_trials = spec.n_stimuli * spec.n_repetitions;
  ep.data.resize(n_trials, n_channels * ep.n_times);
  const auto t0 = static_cast<Index>(std::ceil(spec.planted_window.first * spec.sfreq / 1000.0 - 1e-9));
  const auto t1 = static_cast<Index>(std::ceil(spec.planted_window.second * spec.sfreq / 1000.0 - 1e-9));
  Index trial = 0;
  for (int rep = 0; rep < spec.n_repetitions; ++rep) {
    for (Index s = 0; s < spec.n_stimuli; ++s, ++trial) {
      for (Index c = 0; c < n_channels; ++c)
        for (Index t = 0; t < ep.n_times; ++t) ep.data(trial, c * ep.n_times + t) = rng.normal();
      for (Index c = 0; c < n_channels; ++c) {
        if (readout(s, c) == 0.0) continue;
        for (Index t = t0; t < std::min(t1, ep.n_times); ++t) ep.data(trial, c * ep.n_times + t) += readout(s, c);
      }
      ep.stimulus_ids.push_back(ids[static_cast<std::size_t>(s)]);
      ep.repetition_index.push_back(rep);
    }
  }

  const Montage builtin = Montage::builtin();
  for (const auto& name : spec.channel_names) {
    if (const auto* e = builtin.find(name)) out.montage.entries.push_back(*e);
    else out.montage.entries.push_back({name, 0.0, 0.0, region_from_channel_name(name)});
  }
  return out;
}

fs::path write_synth_dataset(const SynthSpec& spec, const fs::path& dir, int n_subjects, NpyDtype dtype) {
  if (n_subjects < 1) throw parameter_error("write_synth_dataset: need at least one subject");
  fs::create_directories(dir);
  Manifest m;
  m.dtype = dtype;
  m.sfreq = spec.sfreq;
  m.t_start_ms = 0.0;
  m.t_end_ms = spec.epoch_ms;
  m.channel_names = spec.channel_names;

  std::optional<StructuredDataset> first;
  for (int s = 0; s < n_subjects; ++s) {
    SynthSpec subject_spec = spec;
    subject_spec.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(s));
    // Every subject sees the same stimuli, hence the same features.
    auto data = gen_structured_epochs(subject_spec, first ? &first->features : nullptr);
    char name[32];
    std::snprintf(name, sizeof name, "sub-%02d", s + 1);
    const std::string eeg_file = std::string(name) + "_eeg.npy";
    save_epochs(data.epochs, dir / eeg_file, dtype);
    m.subjects.push_back({name, eeg_file, data.epochs.stimulus_ids, data.epochs.repetition_index, std::nullopt, std::nullopt});
    if (!first) first = std::move(data);
  }

  const std::string feature_file = spec.model_id + "_features.npy";
  save_features(first->features, dir / feature_file, dtype);
  m.features.push_back({spec.model_id, feature_file, first->features.layer_names, first->features.stimulus_ids});

  first->montage.write_csv(dir / "montage.csv");
  m.montage_path = "montage.csv";
  if (first->categories) {
    first->categories->write_csv(dir / "categories.csv", first->features.stimulus_ids);
    m.categories_path = "categories.csv";
    m.categories = first->categories->categories;
  }
  const fs::path manifest = dir / "manifest.json";
  m.write(manifest);
  return manifest;
}

std::pair<std::optional<double>, std::optional<double>> rank_oracle(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw parameter_error("rank_oracle: length mismatch");
  if (x.size() > 12) throw parameter_error("rank_oracle: length capped at 12");
  if (x.size() < 2) throw parameter_error("rank_oracle: need at least 2 observations");
  const Index n = x.size();
  auto explicit_ranks = [n](const Vector& v) {
    Vector r(n);
    for (Index i = 0; i < n; ++i) {
      Index less = 0, equal = 0;
      for (Index j = 0; j < n; ++j) {
        less += v(j) < v(i) ? 1 : 0;
        equal += v(j) == v(i) ? 1 : 0;
      }
      r(i) = 1.0 + static_cast<double>(less) + static_cast<double>(equal - 1) / 2.0;
    }
    return r;
  };
  const auto rho = pearson(explicit_ranks(x), explicit_ranks(y));

  std::int64_t concordant = 0, discordant = 0, only_x = 0, only_y = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double dx = x(j) - x(i), dy = y(j) - y(i);
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) ++only_x;
      else if (dy == 0) ++only_y;
      else if ((dx > 0) == (dy > 0)) ++concordant;
      else ++discordant;
    }
  }
  KendallCounts counts;
  counts.concordant_minus_discordant = concordant - discordant;
  counts.pairs_untied_x = concordant + discordant + only_y;
  counts.pairs_untied_y = concordant + discordant + only_x;
  return {rho, tau_b(counts)};
}

}  // namespace brainalign
