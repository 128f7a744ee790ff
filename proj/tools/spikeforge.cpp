// spikeforge: data generation, paired training, redundancy analysis,
// energy accounting and report emission.
//
// Exit codes: 0 success, 1 usage or input error, 2 runtime failure.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "spikeforge/analysis/report.hpp"
#include "spikeforge/energy/energy.hpp"
#include "spikeforge/event_data/dataset_dir.hpp"
#include "spikeforge/numerics/parallel.hpp"
#include "spikeforge/training/checkpoint.hpp"
#include "spikeforge/training/trainer.hpp"

namespace fs = std::filesystem;
using namespace spikeforge;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "spikeforge " SPIKEFORGE_VERSION;

// Input problems (bad flags, files, configs) exit 1; everything else 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string csv_row(const EpochMetrics& m) {
  return std::to_string(m.epoch) + "," + format_number(m.loss) + "," + format_number(m.accuracy) + "," +
         format_number(m.nasfr) + "\n";
}

// Splits the dataset with the run's split parameters and bins both halves.
std::pair<LabeledFrames, LabeledFrames> prepare_split(const DatasetDir& ds, const RunConfig& cfg) {
  if (ds.geometry.width != cfg.network.in_width || ds.geometry.height != cfg.network.in_height) {
    throw InputError("dataset is " + std::to_string(ds.geometry.width) + "x" + std::to_string(ds.geometry.height) +
                     " but the config expects " + std::to_string(cfg.network.in_width) + "x" +
                     std::to_string(cfg.network.in_height));
  }
  std::vector<int> labels;
  for (const DatasetEntry& e : ds.entries) labels.push_back(e.label);
  const SplitIndices split = split_indices(labels, cfg.train.train_frac, cfg.train.split_seed);
  std::vector<EventStream> train, test;
  for (std::size_t i : split.train) train.push_back(ds.streams[i]);
  for (std::size_t i : split.test) test.push_back(ds.streams[i]);
  try {
    return {bin_dataset(train, cfg), bin_dataset(test, cfg)};
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
}

// ------------------------------------------------------------ gen-data

struct GenDataArgs {
  std::string out;
  std::size_t classes = 4;
  std::size_t n_per_class = 100;
  std::string hw = "32,32";
  double noise_density = 0.02;
  double duration_ms = 64;
  std::uint64_t seed = 0;
  std::string format = "bin";
};

int cmd_gen_data(const GenDataArgs& a) {
  SynthParams p;
  p.classes = a.classes;
  p.n_per_class = a.n_per_class;
  p.noise_density = a.noise_density;
  p.duration_ms = a.duration_ms;
  p.seed = a.seed;
  unsigned h = 0, w = 0;
  char tail = 0;
  if (std::sscanf(a.hw.c_str(), "%u,%u%c", &h, &w, &tail) != 2 || h == 0 || w == 0 || h > 65535 || w > 65535) {
    throw InputError("--hw expects H,W, got '" + a.hw + "'");
  }
  p.height = static_cast<std::uint16_t>(h);
  p.width = static_cast<std::uint16_t>(w);
  const EventFormat fmt = a.format == "csv" ? EventFormat::csv : EventFormat::bin;
  std::vector<DatasetEntry> entries;
  try {
    entries = write_synth_dataset(a.out, p, fmt);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  std::cout << "wrote " << entries.size() << " samples to " << a.out << "\n";
  return 0;
}

// --------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string config;
  std::string asa;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::string out;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg;
  try {
    if (!a.config.empty()) cfg = load_run_config(a.config);
    if (!a.asa.empty()) set_asa_mode(cfg.network, a.asa);
    plan_layers(cfg.network);
  } catch (const ConfigError& e) {
    throw InputError((a.config.empty() ? std::string("config") : a.config) + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.epochs) cfg.train.epochs = *a.epochs;

  DatasetDir ds;
  try {
    ds = load_dataset_dir(a.data);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  const auto [train_set, test_set] = prepare_split(ds, cfg);

  const fs::path out(a.out);
  fs::create_directories(out);
  std::ofstream metrics(out / "metrics.csv", std::ios::binary | std::ios::trunc);
  metrics << "epoch,loss,acc,nasfr\n";
  std::cout << "training " << asa_mode_string(cfg.network) << " seed " << cfg.train.seed << " on "
            << train_set.size() << " samples\n";

  TrainResult res;
  try {
    res = train(cfg, train_set, [&](const EpochMetrics& m) {
      metrics << csv_row(m) << std::flush;
      std::cout << "epoch " << m.epoch << " loss " << format_number(m.loss) << " acc " << format_number(m.accuracy)
                << " nasfr " << format_number(m.nasfr) << std::endl;
    });
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  const Network net(cfg.network);
  OpCountReport ops;
  const EvalResult ev = evaluate(net, res.params, test_set, std::nullopt,
                                 [&](std::size_t, const ForwardRecord& rec) { ops.merge(count_ops(net, rec)); });

  const std::string config_hash = hex64(spikeforge::config_hash(cfg));
  const std::string init_hash = hex64(res.init_hash);
  save_checkpoint(out / "ckpt.bin", cfg, res.params,
                  {{"test_accuracy", ev.accuracy}, {"init_hash", init_hash}, {"config_hash", config_hash}});

  ojson ops_json = to_json(ops);
  ops_json["asa_mac_formula"] = asa_mac_formula();
  write_file(out / "ops.json", ops_json.dump(1) + "\n");

  ojson manifest;
  manifest["version"] = kVersion;
  manifest["config_hash"] = config_hash;
  manifest["seed"] = cfg.train.seed;
  manifest["asa"] = asa_mode_string(cfg.network);
  manifest["init_hash"] = init_hash;
  manifest["data"] = fs::absolute(a.data).lexically_normal().string();
  manifest["train_samples"] = train_set.size();
  manifest["test_samples"] = test_set.size();
  manifest["epochs"] = cfg.train.epochs;
  manifest["final_train_loss"] = res.metrics.empty() ? 0.0 : res.metrics.back().loss;
  manifest["test_accuracy"] = ev.accuracy;
  manifest["files"] = {{"checkpoint", "ckpt.bin"}, {"metrics", "metrics.csv"}, {"ops", "ops.json"}};
  write_file(out / "manifest.json", manifest.dump(1) + "\n");
  std::cout << "test accuracy " << format_number(ev.accuracy) << " (" << ev.correct << "/" << ev.total << ")\n";
  return 0;
}

// ------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string ckpt;
  std::string data;
  std::string out;
  bool no_images = false;
  bool no_plots = false;
  AnalysisConfig analysis;
};

int cmd_analyze(const AnalyzeArgs& a) {
  Checkpoint ck;
  try {
    ck = load_checkpoint(a.ckpt);
  } catch (const CheckpointError& e) {
    throw InputError(e.what());
  }
  DatasetDir ds;
  try {
    ds = load_dataset_dir(a.data);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  const LabeledFrames test_set = prepare_split(ds, ck.config).second;
  const Network net(ck.config.network);
  const EvalResult ev = evaluate(net, ck.params, test_set, a.analysis);
  const AnalysisBundle& b = *ev.analysis;

  ReportOptions opts;
  opts.feature_images = !a.no_images;
  opts.plots = !a.no_plots;
  write_analysis(b, a.out, opts);

  ojson summary;
  summary["asa"] = asa_mode_string(ck.config.network);
  summary["samples"] = b.samples();
  summary["accuracy"] = ev.accuracy;
  summary["nasfr"] = std::stod(format_number(nasfr(b.sfr())));
  ojson tsfr = ojson::array();
  for (double v : t_sfr(b.sfr())) tsfr.push_back(std::stod(format_number(v)));
  summary["t_sfr"] = std::move(tsfr);
  summary["qe"] = std::stod(format_number(b.qe().overall()));
  summary["pattern_fractions"] = {{"noise", std::stod(format_number(b.pattern_fraction(Pattern::noise)))},
                                  {"normal", std::stod(format_number(b.pattern_fraction(Pattern::normal)))},
                                  {"null", std::stod(format_number(b.pattern_fraction(Pattern::null)))}};
  write_file(fs::path(a.out) / "summary.json", summary.dump(1) + "\n");
  std::cout << "analyzed " << b.samples() << " test samples: accuracy " << format_number(ev.accuracy) << ", nasfr "
            << format_number(nasfr(b.sfr())) << ", qe " << format_number(b.qe().overall()) << "\n";
  return 0;
}

// -------------------------------------------------------------- energy

struct EnergyArgs {
  std::string vanilla;
  std::string asa;
  std::string out;
};

int cmd_energy(const EnergyArgs& a) {
  const auto load_ops = [](const std::string& dir) {
    if (!fs::is_directory(dir)) throw InputError("run directory not found: " + dir);
    try {
      return op_counts_from_json(read_json(fs::path(dir) / "ops.json"));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(dir + "/ops.json: " + e.what());
    }
  };
  const OpCountReport vanilla = load_ops(a.vanilla);
  const OpCountReport asa = load_ops(a.asa);
  const EnergyReport e = delta_energy(vanilla, asa);
  ojson j;
  j["version"] = kVersion;
  j["delta_e_formula"] = "delta_e = e_mac * delta_mac - e_ac * delta_ac (per sample, pJ)";
  j["asa_mac_formula"] = asa_mac_formula();
  j["notes"] = "first conv runs on real-valued frames and is counted as MACs in both runs, so it cancels";
  j["energy"] = to_json(e);
  j["vanilla"] = to_json(vanilla);
  j["asa"] = to_json(asa);
  j["reference"] = reference_rows();
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_file(out, j.dump(1) + "\n");
  fs::path csv = out;
  csv.replace_extension(".csv");
  write_file(csv, op_count_csv(vanilla, asa));
  std::cout << "delta_e " << format_number(e.delta_e_pj) << " pJ per sample (" << format_number(e.delta_e_percent)
            << "% of vanilla)\n";
  return 0;
}

// -------------------------------------------------------------- report

struct RunSummary {
  std::string dir;
  nlohmann::json manifest;
  std::optional<nlohmann::json> analysis;
};

std::string fmt_opt(const std::optional<nlohmann::json>& j, const char* key) {
  if (!j || !j->contains(key)) return "-";
  return format_number(j->at(key).get<double>());
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out_path) {
  std::vector<RunSummary> rs;
  for (const std::string& dir : runs) {
    if (!fs::is_directory(dir)) throw InputError("run directory not found: " + dir);
    RunSummary r{dir, read_json(fs::path(dir) / "manifest.json"), std::nullopt};
    if (fs::exists(fs::path(dir) / "analysis" / "summary.json")) {
      r.analysis = read_json(fs::path(dir) / "analysis" / "summary.json");
    }
    rs.push_back(std::move(r));
  }
  // Vanilla NASFR per seed, for the relative-change column.
  std::map<std::uint64_t, double> vanilla_nasfr;
  for (const RunSummary& r : rs) {
    if (r.manifest.value("asa", "") == "off" && r.analysis) {
      vanilla_nasfr[r.manifest.value("seed", std::uint64_t{0})] = r.analysis->at("nasfr").get<double>();
    }
  }

  std::ostringstream md;
  md << "# Run report\n\n## Accuracy and firing\n\n";
  md << "| run | asa | seed | test accuracy | NASFR | NASFR change |\n|---|---|---|---|---|---|\n";
  for (const RunSummary& r : rs) {
    const std::string mode = r.manifest.value("asa", "?");
    const std::uint64_t seed = r.manifest.value("seed", std::uint64_t{0});
    std::string change = "-";
    const auto it = vanilla_nasfr.find(seed);
    if (mode != "off" && r.analysis && it != vanilla_nasfr.end() && it->second > 0) {
      change = format_number(100.0 * (r.analysis->at("nasfr").get<double>() - it->second) / it->second) + "%";
    }
    md << "| " << fs::path(r.dir).filename().string() << " | " << mode << " | " << seed << " | "
       << format_number(r.manifest.value("test_accuracy", 0.0)) << " | " << fmt_opt(r.analysis, "nasfr") << " | "
       << change << " |\n";
  }
  md << "\n## Quantization error\n\n| run | asa | QE |\n|---|---|---|\n";
  for (const RunSummary& r : rs) {
    md << "| " << fs::path(r.dir).filename().string() << " | " << r.manifest.value("asa", "?") << " | "
       << fmt_opt(r.analysis, "qe") << " |\n";
  }
  md << "\n## Spike patterns (fraction of channel-timestep cells)\n\n| run | asa | noise | normal | null |\n"
     << "|---|---|---|---|---|\n";
  for (const RunSummary& r : rs) {
    std::optional<nlohmann::json> pf;
    if (r.analysis && r.analysis->contains("pattern_fractions")) pf = r.analysis->at("pattern_fractions");
    md << "| " << fs::path(r.dir).filename().string() << " | " << r.manifest.value("asa", "?") << " | "
       << fmt_opt(pf, "noise") << " | " << fmt_opt(pf, "normal") << " | " << fmt_opt(pf, "null") << " |\n";
  }

  std::string text = md.str();
  const fs::path out(out_path);
  if (out.extension() == ".html") {
    // Minimal conversion: the markdown is wrapped verbatim in <pre>.
    std::string esc;
    for (char c : text) {
      if (c == '<') esc += "&lt;";
      else if (c == '>') esc += "&gt;";
      else if (c == '&') esc += "&amp;";
      else esc += c;
    }
    text = "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Run report</title></head><body><pre>\n" + esc +
           "</pre></body></html>\n";
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_file(out, text);
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking network redundancy toolkit: synthetic event data, paired vanilla/attention training, "
               "firing-rate and membrane-potential analysis, energy accounting."};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::optional<std::size_t> threads;
  app.add_option("--threads", threads, "Worker thread cap (default: SPIKEFORGE_THREADS or all cores)")
      ->check(CLI::PositiveNumber);

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic moving-bar event dataset");
  gen->add_option("--out", gd.out, "Output directory")->required();
  gen->add_option("--classes", gd.classes, "Number of motion classes (1-4)")->check(CLI::Range(1, 4));
  gen->add_option("--n-per-class", gd.n_per_class, "Samples per class")->check(CLI::PositiveNumber);
  gen->add_option("--hw", gd.hw, "Sensor height,width");
  gen->add_option("--noise-density", gd.noise_density, "Noise events per patch pixel per ms")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--duration-ms", gd.duration_ms, "Stream duration")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gd.seed, "Base seed; sample i uses seed + i");
  gen->add_option("--format", gd.format, "Event file format")->check(CLI::IsMember({"bin", "csv"}));

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train one network on the train split and evaluate the test split");
  tr->add_option("--data", ta.data, "Dataset directory from gen-data")->required();
  tr->add_option("--config", ta.config, "Run config file (defaults apply when omitted)");
  tr->add_option("--asa", ta.asa, "Attention mode, overrides the config")->check(CLI::IsMember({"off", "asa1", "asa2"}));
  tr->add_option("--seed", ta.seed, "Init and shuffle seed, overrides the config");
  tr->add_option("--epochs", ta.epochs, "Epoch count, overrides the config")->check(CLI::PositiveNumber);
  tr->add_option("--out", ta.out, "Run directory")->required();

  AnalyzeArgs aa;
  auto* an = app.add_subcommand("analyze", "Redundancy analysis of a checkpoint on its test split");
  an->add_option("--ckpt", aa.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  an->add_option("--data", aa.data, "Dataset directory")->required();
  an->add_option("--out", aa.out, "Output directory")->required();
  an->add_option("--bins", aa.analysis.bins, "MPD histogram bins")->check(CLI::Range(3, 100000));
  an->add_option("--eps-ptd", aa.analysis.eps_ptd, "PTD tolerance for the noise label")->check(CLI::NonNegativeNumber);
  an->add_option("--ghost-threshold", aa.analysis.ghost_threshold, "Cosine similarity for ghost pairs");
  an->add_flag("--no-images", aa.no_images, "Skip spike-feature PGMs");
  an->add_flag("--no-plots", aa.no_plots, "Skip SVG plots");

  EnergyArgs ea;
  auto* en = app.add_subcommand("energy", "Energy shift between a vanilla and an attention run");
  en->add_option("--vanilla-run", ea.vanilla, "Vanilla run directory")->required();
  en->add_option("--asa-run", ea.asa, "Attention run directory")->required();
  en->add_option("--out", ea.out, "Output JSON file (an op-count CSV is written beside it)")->required();

  std::vector<std::string> runs;
  std::string report_out;
  auto* rp = app.add_subcommand("report", "Consolidated markdown or HTML report over run directories");
  rp->add_option("--runs", runs, "Run directories")->required();
  rp->add_option("--out", report_out, "report.md or report.html")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (threads) set_thread_count(*threads);

  try {
    if (*gen) return cmd_gen_data(gd);
    if (*tr) return cmd_train(ta);
    if (*an) return cmd_analyze(aa);
    if (*en) return cmd_energy(ea);
    if (*rp) return cmd_report(runs, report_out);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
