#include "brainalign/preprocess.hpp"

#include <cmath>
#include <unordered_map>

#include "brainalign/log.hpp"

namespace brainalign {

Index clamp_pca_components(Index requested, Index n, Index d) {
  const Index cap = std::min<Index>(n - 1, d);
  if (requested > cap) {
    log::warn("PCA: " + std::to_string(requested) + " components requested, clamped to min(n-1, d) = " +
              std::to_string(cap));
    return cap;
  }
  return requested;
}

EEGEpochs average_repetitions(const EEGEpochs& epochs) {
  std::vector<std::string> order;
  std::unordered_map<std::string, Index> slot;
  std::vector<Index> slot_of_trial(static_cast<std::size_t>(epochs.n_trials()));
  for (Index t = 0; t < epochs.n_trials(); ++t) {
    const auto& id = epochs.stimulus_ids[static_cast<std::size_t>(t)];
    auto [it, inserted] = slot.emplace(id, static_cast<Index>(order.size()));
    if (inserted) order.push_back(id);
    slot_of_trial[static_cast<std::size_t>(t)] = it->second;
  }
  EEGEpochs out = epochs;
  const auto n_out = static_cast<Index>(order.size());
  out.data = RowMatrix::Zero(n_out, epochs.data.cols());
  Vector counts = Vector::Zero(n_out);
  for (Index t = 0; t < epochs.n_trials(); ++t) {
    const Index s = slot_of_trial[static_cast<std::size_t>(t)];
    out.data.row(s) += epochs.data.row(t);
    counts(s) += 1.0;
  }
  for (Index s = 0; s < n_out; ++s)
    if (counts(s) != 1.0) out.data.row(s) /= counts(s);
  out.stimulus_ids = std::move(order);
  out.repetition_index.assign(static_cast<std::size_t>(n_out), 0);
  return out;
}

std::pair<Index, Index> window_samples(const EEGEpochs& epochs, double start_ms, double end_ms) {
  const double tol = 1e-9;
  if (!(start_ms >= epochs.t_start_ms - tol && end_ms <= epochs.t_end_ms + tol && end_ms > start_ms))
    throw range_error("window [" + std::to_string(start_ms) + ", " + std::to_string(end_ms) +
                      ") ms is outside epoch [" + std::to_string(epochs.t_start_ms) + ", " +
                      std::to_string(epochs.t_end_ms) + ") ms");
  auto first_at_or_after = [&](double ms) {
    const double pos = (ms - epochs.t_start_ms) * epochs.sfreq / 1000.0;
    return std::clamp<Index>(static_cast<Index>(std::ceil(pos - tol)), 0, epochs.n_times);
  };
  const Index first = first_at_or_after(start_ms);
  const Index last = first_at_or_after(end_ms);
  if (last <= first)
    throw range_error("window [" + std::to_string(start_ms) + ", " + std::to_string(end_ms) + ") ms holds no sample");
  return {first, last};
}

EEGEpochs baseline_correct(const EEGEpochs& epochs, double baseline_start_ms, double baseline_end_ms) {
  const auto [first, last] = window_samples(epochs, baseline_start_ms, baseline_end_ms);
  EEGEpochs out = epochs;
  const Index len = last - first;
  for (Index tr = 0; tr < epochs.n_trials(); ++tr) {
    for (Index c = 0; c < epochs.n_channels; ++c) {
      auto seg = out.data.row(tr).segment(c * epochs.n_times, epochs.n_times);
      const double base = seg.segment(first, len).mean();
      seg.array() -= base;
    }
  }
  return out;
}

Matrix window_flatten(const EEGEpochs& epochs, double start_ms, double end_ms) {
  const auto [first, last] = window_samples(epochs, start_ms, end_ms);
  const Index len = last - first;
  Matrix out(epochs.n_trials(), epochs.n_channels * len);
  for (Index c = 0; c < epochs.n_channels; ++c)
    out.middleCols(c * len, len) = epochs.data.middleCols(c * epochs.n_times + first, len);
  return out;
}

Matrix window_channel_means(const EEGEpochs& epochs, double start_ms, double end_ms) {
  const auto [first, last] = window_samples(epochs, start_ms, end_ms);
  Matrix out(epochs.n_trials(), epochs.n_channels);
  for (Index c = 0; c < epochs.n_channels; ++c)
    out.col(c) = epochs.data.middleCols(c * epochs.n_times + first, last - first).rowwise().mean();
  return out;
}

std::vector<std::pair<double, double>> tile_windows(const EEGEpochs& epochs, double width_ms) {
  if (!(width_ms > 0.0)) throw parameter_error("window width must be positive");
  const double origin = std::max(0.0, epochs.t_start_ms);
  const double span = epochs.t_end_ms - origin;
  const auto count = static_cast<Index>(std::floor(span / width_ms + 1e-9));
  if (count < 1)
    throw parameter_error("epoch [" + std::to_string(origin) + ", " + std::to_string(epochs.t_end_ms) +
                          ") ms is shorter than one " + std::to_string(width_ms) + " ms window");
  if (std::abs(count * width_ms - span) > 1e-9)
    log::warn("window width " + std::to_string(width_ms) + " ms does not divide the epoch; trailing partial window dropped");
  std::vector<std::pair<double, double>> windows;
  for (Index w = 0; w < count; ++w)
    windows.emplace_back(origin + static_cast<double>(w) * width_ms, origin + static_cast<double>(w + 1) * width_ms);
  return windows;
}

}  // namespace brainalign
