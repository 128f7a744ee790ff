#pragma once

// Membrane potential distributions, peak-to-threshold distance, pattern
// labels and quantization error. Means and variances are accumulated in
// 2^-24 fixed point so merging partials in any order is bit-identical.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spikeforge/analysis/sfr.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

__extension__ typedef __int128 wide_int;

struct HistogramRange {
  std::size_t bins = 50;
  double lo = -2.5;
  double hi = 3.5;

  /// The default range, [v_th - 3, v_th + 3].
  static HistogramRange around(double v_th, std::size_t bins = 50, double half_width = 3.0);
};

struct MPDHistogram {
  std::size_t layer = 0, channel = 0, timestep = 0;
  std::vector<double> bin_edges;  // bins + 1, ascending
  std::vector<std::uint64_t> counts;
  double mean = 0;
  double variance = 0;  // population variance of the raw values
  std::uint64_t n = 0;
};

/// Histogram of raw values; out-of-range values land in the edge bins.
MPDHistogram mpd(std::span<const real> values, const HistogramRange& range);

/// Streaming version keyed by (layer, t, c), mergeable.
class MPDAccumulator {
 public:
  MPDAccumulator() = default;
  MPDAccumulator(std::vector<MapShape> layers, std::size_t timesteps, HistogramRange range);

  /// `u` is layer l's (T, C, H, W) membrane potential for one sample.
  void add(std::size_t layer, const Tensor& u);
  void merge(const MPDAccumulator& other);

  MPDHistogram histogram(std::size_t layer, std::size_t channel, std::size_t timestep) const;
  const HistogramRange& range() const noexcept { return range_; }

 private:
  struct Cell {
    std::vector<std::uint64_t> counts;
    wide_int sum = 0;
    wide_int sum_sq = 0;
    std::uint64_t n = 0;
  };
  std::vector<MapShape> layers_;
  std::size_t timesteps_ = 0;
  HistogramRange range_;
  std::vector<std::vector<Cell>> cells_;  // [layer][t * C + c]
};

/// Mean midpoint of the three fullest bins (ties to the lower index) minus v_th.
double ptd(const MPDHistogram& h, double v_th);

enum class Pattern { noise, normal, null };

std::string to_string(Pattern p);

/// null when the channel never fires, otherwise noise when ptd >= -eps_ptd.
Pattern classify_pattern(double ptd, double c_sfr, double eps_ptd = 0.05);

/// Mean of (U - S)^2 over recorded neurons, timesteps and samples.
class QEAccumulator {
 public:
  QEAccumulator() = default;
  explicit QEAccumulator(std::size_t layers);

  void add(std::size_t layer, const Tensor& u, const Tensor& s);
  void add(const ForwardRecord& rec);
  void merge(const QEAccumulator& other);

  double layer_qe(std::size_t layer) const;
  double overall() const;
  std::size_t layers() const noexcept { return sums_.size(); }

 private:
  std::vector<wide_int> sums_;
  std::vector<std::uint64_t> counts_;
};

/// Direct mean of (U - S)^2 over paired tensors.
double quantization_error(std::span<const Tensor* const> u, std::span<const Tensor* const> s);

}  // namespace spikeforge::inline SPIKEFORGE_ABI
