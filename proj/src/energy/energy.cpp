#include "spikeforge/energy/energy.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace spikeforge::inline SPIKEFORGE_ABI {

std::uint64_t axis_fanout(std::size_t pos, std::size_t kernel, std::size_t stride, std::size_t pad,
                          std::size_t out_size) {
  // o covers pos when 0 <= pos + pad - o*stride < kernel.
  const long p = static_cast<long>(pos + pad);
  const long s = static_cast<long>(stride);
  const long lo_num = p - static_cast<long>(kernel) + 1;
  const long lo = lo_num <= 0 ? 0 : (lo_num + s - 1) / s;
  const long hi = std::min(p / s, static_cast<long>(out_size) - 1);
  return hi >= lo ? static_cast<std::uint64_t>(hi - lo + 1) : 0;
}

std::uint64_t count_ac_conv(const Tensor& spikes, std::size_t kernel, std::size_t stride, std::size_t pad,
                            std::size_t c_out, FanoutMode mode) {
  if (spikes.rank() != 3 && spikes.rank() != 4) throw ShapeError("count_ac_conv: expected (T,C,H,W) or (C,H,W)");
  const std::size_t r = spikes.rank();
  const std::size_t h = spikes.dim(r - 2), w = spikes.dim(r - 1);
  const std::size_t ho = conv_output_size(h, kernel, stride, pad), wo = conv_output_size(w, kernel, stride, pad);
  std::vector<std::uint64_t> fy(h), fx(w);
  for (std::size_t y = 0; y < h; ++y) fy[y] = mode == FanoutMode::exact ? axis_fanout(y, kernel, stride, pad, ho) : kernel;
  for (std::size_t x = 0; x < w; ++x) fx[x] = mode == FanoutMode::exact ? axis_fanout(x, kernel, stride, pad, wo) : kernel;
  const std::size_t plane = h * w, planes = spikes.size() / plane;
  std::uint64_t total = 0;
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        if (spikes[p * plane + y * w + x] != real(0)) total += fy[y] * fx[x];
      }
    }
  }
  return total * c_out;
}

std::uint64_t AsaMacTerms::total() const {
  return tc_pooling + combine + mlp + activations + mask_mul + sa_pooling + sa_conv + sa_sigmoid + score_mul;
}

AsaMacTerms asa_mac_terms(AsaVariant variant, std::size_t timesteps, std::size_t channels, std::size_t height,
                          std::size_t width, std::size_t reduction) {
  const std::uint64_t T = timesteps, C = channels, HW = height * width, volume = T * C * HW;
  AsaMacTerms m;
  m.tc_pooling = 2 * volume;
  m.combine = 3 * T * C;
  if (variant == AsaVariant::asa1) {
    if (reduction == 0 || timesteps % reduction != 0) throw std::invalid_argument("asa_mac_terms: r must divide T");
    const std::uint64_t hidden = T / reduction;
    m.mlp = C * 2 * T * hidden;
    m.activations = C * hidden + T * C;
  }
  m.mask_mul = 2 * volume;
  m.sa_pooling = 2 * 2 * volume;
  m.sa_conv = 2 * HW * 9 * 2;
  m.sa_sigmoid = 2 * HW;
  m.score_mul = 2 * volume;
  return m;
}

std::uint64_t count_mac_asa(const NetworkConfig& cfg) {
  if (!cfg.asa_enabled) return 0;
  std::uint64_t total = 0;
  for (const LayerGeometry& g : plan_layers(cfg)) {
    total += asa_mac_terms(cfg.asa_variant, cfg.timesteps, g.out_c, g.out_h, g.out_w, cfg.asa_reduction).total();
  }
  return total;
}

std::uint64_t count_mac_input(const NetworkConfig& cfg) {
  const LayerGeometry g = plan_layers(cfg).front();
  return static_cast<std::uint64_t>(cfg.timesteps) * g.out_c * g.in_c * g.spec.kernel * g.spec.kernel * g.out_h *
         g.out_w;
}

std::uint64_t OpCountReport::ac_total() const {
  std::uint64_t s = 0;
  for (const LayerOps& l : layers) s += l.ac;
  return s;
}

std::uint64_t OpCountReport::mac_total() const {
  std::uint64_t s = 0;
  for (const LayerOps& l : layers) s += l.mac;
  return s;
}

double OpCountReport::ac_per_sample() const {
  return samples ? static_cast<double>(ac_total()) / static_cast<double>(samples) : static_cast<double>(ac_total());
}

double OpCountReport::mac_per_sample() const {
  return samples ? static_cast<double>(mac_total()) / static_cast<double>(samples) : static_cast<double>(mac_total());
}

void OpCountReport::merge(const OpCountReport& other) {
  if (layers.empty()) {
    *this = other;
    return;
  }
  if (other.layers.size() != layers.size()) throw std::invalid_argument("op counts: layer count mismatch in merge");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].ac += other.layers[i].ac;
    layers[i].mac += other.layers[i].mac;
  }
  samples += other.samples;
}

OpCountReport count_ops(const Network& net, const ForwardRecord& rec, FanoutMode mode) {
  const NetworkConfig& cfg = net.config();
  const std::vector<LayerGeometry>& geo = net.geometry();
  if (rec.layers.size() != geo.size()) throw ShapeError("count_ops: record has the wrong number of layers");
  OpCountReport r;
  r.samples = 1;
  for (std::size_t n = 0; n < geo.size(); ++n) {
    LayerOps ops{"layer" + std::to_string(n), 0, 0};
    if (n == 0) {
      ops.mac = count_mac_input(cfg);
    } else {
      const ConvLayerSpec& s = geo[n].spec;
      ops.ac = count_ac_conv(rec.layers[n - 1].pooled, s.kernel, s.stride, s.pad, geo[n].out_c, mode);
    }
    if (cfg.asa_enabled) {
      ops.mac += asa_mac_terms(cfg.asa_variant, cfg.timesteps, geo[n].out_c, geo[n].out_h, geo[n].out_w,
                               cfg.asa_reduction)
                     .total();
    }
    r.layers.push_back(ops);
  }
  // Every pooled spike of the last block reaches each class logit once.
  std::uint64_t spikes = 0;
  for (real v : rec.layers.back().pooled.values()) spikes += v != real(0);
  r.layers.push_back({"readout", spikes * cfg.num_classes, 0});
  return r;
}

EnergyReport delta_energy(const OpCountReport& vanilla, const OpCountReport& asa) {
  EnergyReport e;
  e.delta_mac = asa.mac_per_sample() - vanilla.mac_per_sample();
  e.delta_ac = vanilla.ac_per_sample() - asa.ac_per_sample();
  e.delta_e_pj = e.e_mac_pj * e.delta_mac - e.e_ac_pj * e.delta_ac;
  e.vanilla_pj = e.e_mac_pj * vanilla.mac_per_sample() + e.e_ac_pj * vanilla.ac_per_sample();
  e.asa_pj = e.e_mac_pj * asa.mac_per_sample() + e.e_ac_pj * asa.ac_per_sample();
  e.delta_e_percent = e.vanilla_pj > 0 ? 100.0 * e.delta_e_pj / e.vanilla_pj : 0.0;
  return e;
}

nlohmann::ordered_json to_json(const OpCountReport& r) {
  nlohmann::ordered_json j;
  j["samples"] = r.samples;
  j["ac_total"] = r.ac_total();
  j["mac_total"] = r.mac_total();
  j["ac_per_sample"] = r.ac_per_sample();
  j["mac_per_sample"] = r.mac_per_sample();
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const LayerOps& l : r.layers) layers.push_back({{"name", l.name}, {"ac", l.ac}, {"mac", l.mac}});
  j["layers"] = std::move(layers);
  return j;
}

nlohmann::ordered_json to_json(const EnergyReport& r) {
  return {{"e_mac_pj", r.e_mac_pj},     {"e_ac_pj", r.e_ac_pj},   {"delta_mac", r.delta_mac},
          {"delta_ac", r.delta_ac},     {"delta_e_pj", r.delta_e_pj}, {"vanilla_pj", r.vanilla_pj},
          {"asa_pj", r.asa_pj},         {"delta_e_percent", r.delta_e_percent}};
}

OpCountReport op_counts_from_json(const nlohmann::json& j) {
  OpCountReport r;
  r.samples = j.at("samples").get<std::uint64_t>();
  for (const auto& l : j.at("layers")) {
    r.layers.push_back({l.at("name").get<std::string>(), l.at("ac").get<std::uint64_t>(), l.at("mac").get<std::uint64_t>()});
  }
  return r;
}

std::string op_count_csv(const OpCountReport& vanilla, const OpCountReport& asa) {
  std::ostringstream out;
  out << "run,module,ac,mac\n";
  for (const LayerOps& l : vanilla.layers) out << "vanilla," << l.name << ',' << l.ac << ',' << l.mac << '\n';
  for (const LayerOps& l : asa.layers) out << "asa," << l.name << ',' << l.ac << ',' << l.mac << '\n';
  return out.str();
}

nlohmann::ordered_json reference_rows() {
  using J = nlohmann::ordered_json;
  J rows = J::array();
  rows.push_back(J{{"source", "published"},
                   {"dataset", "Gait-day"},
                   {"network", "three-layer LIF-SNN"},
                   {"vanilla_accuracy", 88.6},
                   {"asa_accuracy", 93.6},
                   {"vanilla_nasfr", 0.214},
                   {"asa_nasfr", 0.045},
                   {"spike_reduction_percent", -78.9},
                   {"delta_mac", "+2.6M"},
                   {"energy_reduction_percent", 76}});
  const struct {
    const char* dataset;
    double vanilla, asa;
  } qe[] = {{"Gesture", 0.158, 0.024}, {"Gait-day", 0.362, 0.031}, {"HAR-DVS", 0.584, 0.339}};
  for (const auto& q : qe) {
    rows.push_back(J{{"source", "published"}, {"dataset", q.dataset}, {"vanilla_qe", q.vanilla}, {"asa_qe", q.asa}});
  }
  return rows;
}

std::string asa_mac_formula() {
  return "per ASA block: 2TCHW (avg/max over HW) + 3TC (M') + [ASA-1] 2CT(T/r) (MLP) + C(T/r) + TC (ReLU, "
         "sigmoid) + 2TCHW (mask multiplies) + 4TCHW (max/avg over TC, two branches) + 2*HW*9*2 (3x3 convs) + "
         "2HW (sigmoid) + 2TCHW (score multiplies)";
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
