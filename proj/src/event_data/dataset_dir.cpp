#include "spikeforge/event_data/dataset_dir.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace spikeforge::inline SPIKEFORGE_ABI {

std::vector<DatasetEntry> write_synth_dataset(const std::filesystem::path& dir, const SynthParams& params,
                                              EventFormat format) {
  std::filesystem::create_directories(dir);
  const std::size_t n = params.n_per_class * params.classes;
  std::vector<DatasetEntry> entries;
  std::ofstream index(dir / "index.csv", std::ios::binary | std::ios::trunc);
  if (!index) throw std::runtime_error("cannot write " + (dir / "index.csv").string());
  index << "path,label\n";
  for (std::size_t i = 0; i < n; ++i) {
    const SynthSample s = synth_motion_sample(params, i);
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%05zu.%s", i, format == EventFormat::bin ? "bin" : "csv");
    save_events(dir / name, s.stream, format);
    entries.push_back({name, *s.stream.label});
    index << name << ',' << *s.stream.label << '\n';
  }
  nlohmann::ordered_json info;
  info["width"] = params.width;
  info["height"] = params.height;
  info["classes"] = params.classes;
  info["n_per_class"] = params.n_per_class;
  info["duration_ms"] = params.duration_ms;
  info["noise_density"] = params.noise_density;
  info["seed"] = params.seed;
  std::ofstream meta(dir / "dataset.json", std::ios::binary | std::ios::trunc);
  meta << info.dump(1) << '\n';
  return entries;
}

DatasetDir load_dataset_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::invalid_argument("dataset directory not found: " + dir.string());
  std::ifstream meta(dir / "dataset.json");
  if (!meta) throw std::invalid_argument("missing " + (dir / "dataset.json").string());
  DatasetDir out;
  try {
    const nlohmann::json info = nlohmann::json::parse(meta);
    out.geometry.width = info.at("width").get<std::uint16_t>();
    out.geometry.height = info.at("height").get<std::uint16_t>();
    out.duration_ms = info.value("duration_ms", 0.0);
    out.classes = info.value("classes", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(dir.string() + "/dataset.json: " + e.what());
  }

  std::ifstream index(dir / "index.csv");
  if (!index) throw std::invalid_argument("missing " + (dir / "index.csv").string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(index, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (lineno == 1 && line == "path,label")) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("index.csv line " + std::to_string(lineno) + ": expected path,label");
    }
    DatasetEntry e;
    e.path = line.substr(0, comma);
    try {
      std::size_t used = 0;
      e.label = std::stoi(line.substr(comma + 1), &used);
      if (used != line.size() - comma - 1) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw std::invalid_argument("index.csv line " + std::to_string(lineno) + ": bad label");
    }
    const std::filesystem::path p = dir / e.path;
    EventStream s = load_events(p, format_from_path(p), out.geometry);
    s.label = e.label;
    out.streams.push_back(std::move(s));
    out.entries.push_back(std::move(e));
  }
  return out;
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
