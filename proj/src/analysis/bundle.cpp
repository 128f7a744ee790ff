#include "spikeforge/analysis/bundle.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

AnalysisBundle::AnalysisBundle(const Network& net, AnalysisConfig cfg)
    : cfg_(cfg),
      v_th_(net.config().lif.v_th),
      sfr_(lif_shapes(net), net.config().timesteps),
      mpd_(lif_shapes(net), net.config().timesteps, HistogramRange::around(v_th_, cfg.bins, cfg.half_range)),
      qe_(net.geometry().size()) {}

void AnalysisBundle::add(const ForwardRecord& rec) {
  sfr_.add(rec);
  for (std::size_t l = 0; l < rec.layers.size(); ++l) mpd_.add(l, rec.layers[l].u);
  qe_.add(rec);
}

void AnalysisBundle::merge(const AnalysisBundle& other) {
  sfr_.merge(other.sfr_);
  mpd_.merge(other.mpd_);
  qe_.merge(other.qe_);
}

std::vector<PatternRow> AnalysisBundle::patterns() const {
  std::vector<PatternRow> rows;
  for (std::size_t l = 0; l < sfr_.layers().size(); ++l) {
    const std::size_t channels = sfr_.layers()[l].channels;
    const std::vector<double> rates = c_sfr(sfr_, l);
    for (std::size_t t = 0; t < sfr_.timesteps(); ++t) {
      for (std::size_t c = 0; c < channels; ++c) {
        const MPDHistogram h = mpd_.histogram(l, c, t);
        PatternRow row;
        row.layer = l;
        row.channel = c;
        row.timestep = t;
        row.c_sfr = rates[t * channels + c];
        row.ptd = ptd(h, v_th_);
        row.variance = h.variance;
        row.label = classify_pattern(row.ptd, row.c_sfr, cfg_.eps_ptd);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

double AnalysisBundle::pattern_fraction(Pattern p) const {
  const std::vector<PatternRow> rows = patterns();
  if (rows.empty()) return 0.0;
  std::size_t n = 0;
  for (const PatternRow& r : rows) n += r.label == p;
  return static_cast<double>(n) / static_cast<double>(rows.size());
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
