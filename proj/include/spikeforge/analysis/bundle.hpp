#pragma once

#include <vector>

#include "spikeforge/analysis/mpd.hpp"
#include "spikeforge/analysis/sfr.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

struct AnalysisConfig {
  std::size_t bins = 50;
  double half_range = 3.0;  // histogram covers [v_th - h, v_th + h]
  double eps_ptd = 0.05;
  double ghost_threshold = 0.9;
};

struct PatternRow {
  std::size_t layer = 0, channel = 0, timestep = 0;
  double c_sfr = 0;
  double ptd = 0;
  double variance = 0;
  Pattern label = Pattern::null;
};

/// All accumulators fed from eval-mode forward records of one network.
class AnalysisBundle {
 public:
  AnalysisBundle(const Network& net, AnalysisConfig cfg);

  void add(const ForwardRecord& rec);
  void merge(const AnalysisBundle& other);

  const AnalysisConfig& config() const noexcept { return cfg_; }
  double v_th() const noexcept { return v_th_; }
  std::size_t samples() const noexcept { return sfr_.total(); }
  const SFRAccumulator& sfr() const noexcept { return sfr_; }
  const MPDAccumulator& mpd() const noexcept { return mpd_; }
  const QEAccumulator& qe() const noexcept { return qe_; }

  /// One row per (layer, timestep, channel), in that order.
  std::vector<PatternRow> patterns() const;
  /// Fraction of channel-timestep cells with the given label.
  double pattern_fraction(Pattern p) const;

 private:
  AnalysisConfig cfg_;
  double v_th_;
  SFRAccumulator sfr_;
  MPDAccumulator mpd_;
  QEAccumulator qe_;
};

}  // namespace spikeforge::inline SPIKEFORGE_ABI
