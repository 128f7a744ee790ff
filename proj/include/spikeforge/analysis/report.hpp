#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spikeforge/analysis/bundle.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

struct ReportOptions {
  bool feature_images = true;  // features/*.pgm
  bool plots = true;           // plots/*.svg
};

/// Writes sfr.csv, patterns.csv, mpd.json, ghosts.json, qe.json and, when
/// enabled, spike-feature PGMs and SVG plots under `dir`. Returns the
/// relative paths written, in write order.
std::vector<std::string> write_analysis(const AnalysisBundle& bundle, const std::filesystem::path& dir,
                                        const ReportOptions& opts = {});

/// Fixed-format number used by every report so outputs are byte-stable.
std::string format_number(double v);

/// Binary PGM (P5), values in [0,1] mapped to 0..255.
void write_pgm(const std::filesystem::path& path, const Tensor& map);

}  // namespace spikeforge::inline SPIKEFORGE_ABI
