#pragma once

// Spike firing rates. A neuron's rate at timestep t is the fraction of
// samples in which it fired; channel, timestep and network rates average
// those per-neuron rates. Counts are integers so accumulation order never
// changes a result.

#include <cstdint>
#include <vector>

#include "spikeforge/numerics/tensor.hpp"
#include "spikeforge/snn_core/network.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

struct MapShape {
  std::size_t channels = 0, height = 0, width = 0;

  std::size_t size() const { return channels * height * width; }
};

/// LIF map shape of every layer of a network.
std::vector<MapShape> lif_shapes(const Network& net);

class SFRAccumulator {
 public:
  SFRAccumulator() = default;
  SFRAccumulator(std::vector<MapShape> layers, std::size_t timesteps);

  /// Adds one sample. `spikes[l]` is layer l's (T, C, H, W) spike tensor.
  void add(const std::vector<const Tensor*>& spikes);
  void add(const ForwardRecord& rec);
  void merge(const SFRAccumulator& other);

  std::size_t total() const noexcept { return total_; }
  std::size_t timesteps() const noexcept { return timesteps_; }
  const std::vector<MapShape>& layers() const noexcept { return layers_; }
  /// Counts of layer l, laid out (T, C, H, W).
  const std::vector<std::uint32_t>& counts(std::size_t layer) const { return counts_.at(layer); }

 private:
  std::vector<MapShape> layers_;
  std::size_t timesteps_ = 0;
  std::size_t total_ = 0;
  std::vector<std::vector<std::uint32_t>> counts_;
};

/// N-SFR of one layer, (T, C, H, W).
std::vector<double> n_sfr(const SFRAccumulator& acc, std::size_t layer);
/// C-SFR of one layer, indexed t * C + c.
std::vector<double> c_sfr(const SFRAccumulator& acc, std::size_t layer);
/// T-SFR over every neuron of every layer, one entry per timestep.
std::vector<double> t_sfr(const SFRAccumulator& acc);
double nasfr(const SFRAccumulator& acc);

struct SpikeFeature {
  std::size_t layer = 0, channel = 0, timestep = 0;
  Tensor map;  // (H, W) of N-SFR values
};

/// One map per (channel, timestep), channel-major within each timestep.
std::vector<SpikeFeature> spike_features(const SFRAccumulator& acc, std::size_t layer);

/// 0 when either vector is all zero.
double cosine_similarity(std::span<const real> a, std::span<const real> b);

struct GhostPair {
  std::size_t c_i = 0, c_j = 0;
  double similarity = 0;
};

/// All pairs i < j of features whose cosine similarity reaches `threshold`.
/// Features are expected to share one (layer, timestep).
std::vector<GhostPair> ghost_pairs(const std::vector<SpikeFeature>& features, double threshold);

}  // namespace spikeforge::inline SPIKEFORGE_ABI
