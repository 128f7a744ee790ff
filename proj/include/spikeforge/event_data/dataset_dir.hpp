#pragma once

// On-disk dataset: one event file per sample, an index.csv with
// "path,label" rows (paths relative to the directory) and dataset.json
// holding the sensor geometry and generation parameters.

#include <filesystem>
#include <string>
#include <vector>

#include "spikeforge/event_data/events.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

struct DatasetEntry {
  std::string path;
  int label = 0;
};

struct DatasetDir {
  SensorGeometry geometry;
  double duration_ms = 0;
  std::size_t classes = 0;
  std::vector<DatasetEntry> entries;
  std::vector<EventStream> streams;  // labeled, in index order
};

/// Generates the synthetic motion dataset into `dir`.
std::vector<DatasetEntry> write_synth_dataset(const std::filesystem::path& dir, const SynthParams& params,
                                              EventFormat format = EventFormat::bin);

/// Reads index.csv and dataset.json and loads every listed stream.
DatasetDir load_dataset_dir(const std::filesystem::path& dir);

}  // namespace spikeforge::inline SPIKEFORGE_ABI
