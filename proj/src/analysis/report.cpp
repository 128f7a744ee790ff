#include "spikeforge/analysis/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace spikeforge::inline SPIKEFORGE_ABI {
namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_out(path, std::ios::binary);
  out << text;
}

// ordered_json keeps keys in insertion order, which keeps files diffable.
using ojson = nlohmann::ordered_json;

double round9(double v) { return std::stod(format_number(v)); }

std::string sfr_csv(const AnalysisBundle& b) {
  const SFRAccumulator& acc = b.sfr();
  std::ostringstream out;
  out << "scope,layer,timestep,channel,sfr\n";
  for (std::size_t l = 0; l < acc.layers().size(); ++l) {
    const std::size_t channels = acc.layers()[l].channels;
    const std::vector<double> c = c_sfr(acc, l);
    for (std::size_t t = 0; t < acc.timesteps(); ++t) {
      for (std::size_t ch = 0; ch < channels; ++ch) {
        out << "channel," << l << ',' << t << ',' << ch << ',' << format_number(c[t * channels + ch]) << '\n';
      }
    }
  }
  const std::vector<double> ts = t_sfr(acc);
  for (std::size_t t = 0; t < ts.size(); ++t) out << "timestep,," << t << ",," << format_number(ts[t]) << '\n';
  out << "network,,,," << format_number(nasfr(acc)) << '\n';
  return out.str();
}

std::string patterns_csv(const std::vector<PatternRow>& rows) {
  std::ostringstream out;
  out << "layer,c,t,c_sfr,ptd,variance,label\n";
  for (const PatternRow& r : rows) {
    out << r.layer << ',' << r.channel << ',' << r.timestep << ',' << format_number(r.c_sfr) << ','
        << format_number(r.ptd) << ',' << format_number(r.variance) << ',' << to_string(r.label) << '\n';
  }
  return out.str();
}

ojson mpd_json(const AnalysisBundle& b) {
  const SFRAccumulator& acc = b.sfr();
  const HistogramRange& r = b.mpd().range();
  ojson j;
  j["v_th"] = round9(b.v_th());
  j["bins"] = r.bins;
  j["range"] = {round9(r.lo), round9(r.hi)};
  j["samples"] = b.samples();
  ojson hs = ojson::array();
  for (std::size_t l = 0; l < acc.layers().size(); ++l) {
    for (std::size_t t = 0; t < acc.timesteps(); ++t) {
      for (std::size_t c = 0; c < acc.layers()[l].channels; ++c) {
        const MPDHistogram h = b.mpd().histogram(l, c, t);
        ojson e;
        e["layer"] = l;
        e["channel"] = c;
        e["timestep"] = t;
        e["n"] = h.n;
        e["mean"] = round9(h.mean);
        e["variance"] = round9(h.variance);
        e["ptd"] = round9(ptd(h, b.v_th()));
        e["counts"] = h.counts;
        hs.push_back(std::move(e));
      }
    }
  }
  j["histograms"] = std::move(hs);
  return j;
}

ojson ghosts_json(const AnalysisBundle& b) {
  const SFRAccumulator& acc = b.sfr();
  ojson j;
  j["threshold"] = round9(b.config().ghost_threshold);
  j["metric"] = "cosine";
  ojson groups = ojson::array();
  for (std::size_t l = 0; l < acc.layers().size(); ++l) {
    const std::vector<SpikeFeature> all = spike_features(acc, l);
    const std::size_t channels = acc.layers()[l].channels;
    for (std::size_t t = 0; t < acc.timesteps(); ++t) {
      const std::vector<SpikeFeature> at_t(all.begin() + static_cast<std::ptrdiff_t>(t * channels),
                                           all.begin() + static_cast<std::ptrdiff_t>((t + 1) * channels));
      ojson pairs = ojson::array();
      for (const GhostPair& p : ghost_pairs(at_t, b.config().ghost_threshold)) {
        pairs.push_back({{"c_i", p.c_i}, {"c_j", p.c_j}, {"similarity", round9(p.similarity)}});
      }
      groups.push_back({{"layer", l}, {"timestep", t}, {"pairs", std::move(pairs)}});
    }
  }
  j["groups"] = std::move(groups);
  return j;
}

ojson qe_json(const AnalysisBundle& b) {
  ojson j;
  j["samples"] = b.samples();
  j["overall"] = round9(b.qe().overall());
  ojson layers = ojson::array();
  for (std::size_t l = 0; l < b.qe().layers(); ++l) layers.push_back(round9(b.qe().layer_qe(l)));
  j["layers"] = std::move(layers);
  return j;
}

std::string svg_header(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_number(w) + "\" height=\"" +
         format_number(h) + "\" viewBox=\"0 0 " + format_number(w) + " " + format_number(h) +
         "\" font-family=\"sans-serif\" font-size=\"9\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

// Grid of MPD histograms: one row per channel, one column per timestep,
// each panel with a red line at the threshold.
std::string mpd_svg(const AnalysisBundle& b, std::size_t layer) {
  const SFRAccumulator& acc = b.sfr();
  const std::size_t channels = acc.layers()[layer].channels;
  const HistogramRange& r = b.mpd().range();
  const double pw = 90, ph = 40, gap = 6, left = 30, top = 20;
  const double W = left + acc.timesteps() * (pw + gap), H = top + channels * (ph + gap);
  std::ostringstream out;
  out << svg_header(W, H);
  out << "<text x=\"4\" y=\"12\">layer " << layer << " membrane potential distributions (rows: channel, columns: t)"
      << "</text>\n";
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < acc.timesteps(); ++t) {
      const MPDHistogram h = b.mpd().histogram(layer, c, t);
      const double x0 = left + t * (pw + gap), y0 = top + c * (ph + gap);
      const std::uint64_t peak = std::max<std::uint64_t>(1, *std::max_element(h.counts.begin(), h.counts.end()));
      out << "<rect x=\"" << format_number(x0) << "\" y=\"" << format_number(y0) << "\" width=\"" << format_number(pw)
          << "\" height=\"" << format_number(ph) << "\" fill=\"none\" stroke=\"#ccc\"/>\n";
      const double bw = pw / static_cast<double>(h.counts.size());
      for (std::size_t i = 0; i < h.counts.size(); ++i) {
        if (h.counts[i] == 0) continue;
        const double bh = ph * static_cast<double>(h.counts[i]) / static_cast<double>(peak);
        out << "<rect x=\"" << format_number(x0 + i * bw) << "\" y=\"" << format_number(y0 + ph - bh)
            << "\" width=\"" << format_number(bw) << "\" height=\"" << format_number(bh) << "\" fill=\"#4a7ab5\"/>\n";
      }
      const double xt = x0 + pw * (b.v_th() - r.lo) / (r.hi - r.lo);
      out << "<line x1=\"" << format_number(xt) << "\" y1=\"" << format_number(y0) << "\" x2=\"" << format_number(xt)
          << "\" y2=\"" << format_number(y0 + ph) << "\" stroke=\"red\"/>\n";
    }
    out << "<text x=\"2\" y=\"" << format_number(top + c * (ph + gap) + ph / 2) << "\">c" << c << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

// Spike features of the last timestep grouped into noise / normal / null rows.
std::string feature_svg(const AnalysisBundle& b, std::size_t layer, const std::vector<PatternRow>& rows) {
  const SFRAccumulator& acc = b.sfr();
  const MapShape& m = acc.layers()[layer];
  const std::size_t t = acc.timesteps() - 1;
  const std::vector<SpikeFeature> feats = spike_features(acc, layer);
  const double px = std::max(1.0, 48.0 / static_cast<double>(std::max(m.height, m.width)));
  const double fw = px * m.width, fh = px * m.height, gap = 4, left = 50, top = 20;
  const Pattern order[] = {Pattern::noise, Pattern::normal, Pattern::null};
  const double W = left + m.channels * (fw + gap), H = top + 3 * (fh + gap + 10);
  std::ostringstream out;
  out << svg_header(W, H);
  out << "<text x=\"4\" y=\"12\">layer " << layer << " spike features at t=" << t << " by pattern</text>\n";
  for (std::size_t row = 0; row < 3; ++row) {
    const double y0 = top + row * (fh + gap + 10);
    out << "<text x=\"2\" y=\"" << format_number(y0 + fh / 2) << "\">" << to_string(order[row]) << "</text>\n";
    std::size_t col = 0;
    for (const PatternRow& r : rows) {
      if (r.layer != layer || r.timestep != t || r.label != order[row]) continue;
      const SpikeFeature& f = feats[t * m.channels + r.channel];
      const double x0 = left + col * (fw + gap);
      out << "<rect x=\"" << format_number(x0) << "\" y=\"" << format_number(y0) << "\" width=\"" << format_number(fw)
          << "\" height=\"" << format_number(fh) << "\" fill=\"black\"/>\n";
      for (std::size_t y = 0; y < m.height; ++y) {
        for (std::size_t x = 0; x < m.width; ++x) {
          const int g = static_cast<int>(std::lround(std::clamp<double>(f.map[y * m.width + x], 0, 1) * 255));
          if (g == 0) continue;
          out << "<rect x=\"" << format_number(x0 + x * px) << "\" y=\"" << format_number(y0 + y * px)
              << "\" width=\"" << format_number(px) << "\" height=\"" << format_number(px) << "\" fill=\"rgb(" << g
              << ',' << g << ',' << g << ")\"/>\n";
        }
      }
      out << "<text x=\"" << format_number(x0) << "\" y=\"" << format_number(y0 + fh + 9) << "\">c" << r.channel
          << "</text>\n";
      ++col;
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace

std::string format_number(double v) {
  if (v == 0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_pgm(const fs::path& path, const Tensor& map) {
  require_rank(map, 2, "write_pgm");
  std::ofstream out = open_out(path, std::ios::binary);
  out << "P5\n" << map.dim(1) << ' ' << map.dim(0) << "\n255\n";
  for (real v : map.values()) {
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp<double>(v, 0, 1) * 255))));
  }
}

std::vector<std::string> write_analysis(const AnalysisBundle& bundle, const fs::path& dir, const ReportOptions& opts) {
  fs::create_directories(dir);
  std::vector<std::string> written;
  const auto emit = [&](const std::string& rel, const std::string& text) {
    write_text(dir / rel, text);
    written.push_back(rel);
  };
  const std::vector<PatternRow> rows = bundle.patterns();
  emit("sfr.csv", sfr_csv(bundle));
  emit("patterns.csv", patterns_csv(rows));
  emit("mpd.json", mpd_json(bundle).dump(1) + "\n");
  emit("ghosts.json", ghosts_json(bundle).dump(1) + "\n");
  emit("qe.json", qe_json(bundle).dump(1) + "\n");

  const SFRAccumulator& acc = bundle.sfr();
  if (opts.feature_images) {
    fs::create_directories(dir / "features");
    for (std::size_t l = 0; l < acc.layers().size(); ++l) {
      for (const SpikeFeature& f : spike_features(acc, l)) {
        const std::string rel = "features/l" + std::to_string(l) + "_t" + std::to_string(f.timestep) + "_c" +
                                std::to_string(f.channel) + ".pgm";
        write_pgm(dir / rel, f.map);
        written.push_back(rel);
      }
    }
  }
  if (opts.plots) {
    fs::create_directories(dir / "plots");
    for (std::size_t l = 0; l < acc.layers().size(); ++l) {
      emit("plots/mpd_layer" + std::to_string(l) + ".svg", mpd_svg(bundle, l));
      emit("plots/features_layer" + std::to_string(l) + ".svg", feature_svg(bundle, l, rows));
    }
  }
  return written;
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
