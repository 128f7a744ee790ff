#include "spikeforge/analysis/sfr.hpp"

#include <cmath>
#include <stdexcept>

namespace spikeforge::inline SPIKEFORGE_ABI {

std::vector<MapShape> lif_shapes(const Network& net) {
  std::vector<MapShape> out;
  for (const LayerGeometry& g : net.geometry()) out.push_back({g.out_c, g.out_h, g.out_w});
  return out;
}

SFRAccumulator::SFRAccumulator(std::vector<MapShape> layers, std::size_t timesteps)
    : layers_(std::move(layers)), timesteps_(timesteps) {
  for (const MapShape& m : layers_) counts_.emplace_back(timesteps_ * m.size(), 0u);
}

void SFRAccumulator::add(const std::vector<const Tensor*>& spikes) {
  if (spikes.size() != layers_.size()) throw ShapeError("sfr: record has the wrong number of layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const MapShape& m = layers_[l];
    require_shape(*spikes[l], Shape{timesteps_, m.channels, m.height, m.width}, "sfr spikes");
    std::vector<std::uint32_t>& c = counts_[l];
    const auto s = spikes[l]->values();
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += s[i] != real(0);
  }
  ++total_;
}

void SFRAccumulator::add(const ForwardRecord& rec) {
  std::vector<const Tensor*> spikes;
  for (const auto& l : rec.layers) spikes.push_back(&l.s);
  add(spikes);
}

void SFRAccumulator::merge(const SFRAccumulator& other) {
  if (other.layers_.size() != layers_.size() || other.timesteps_ != timesteps_) {
    throw ShapeError("sfr: cannot merge accumulators of different networks");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (other.counts_[l].size() != counts_[l].size()) throw ShapeError("sfr: layer shape mismatch in merge");
    for (std::size_t i = 0; i < counts_[l].size(); ++i) counts_[l][i] += other.counts_[l][i];
  }
  total_ += other.total_;
}

std::vector<double> n_sfr(const SFRAccumulator& acc, std::size_t layer) {
  const std::vector<std::uint32_t>& c = acc.counts(layer);
  std::vector<double> out(c.size(), 0.0);
  if (acc.total() == 0) return out;
  const double denom = static_cast<double>(acc.total());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i] / denom;
  return out;
}

std::vector<double> c_sfr(const SFRAccumulator& acc, std::size_t layer) {
  const MapShape& m = acc.layers().at(layer);
  const std::vector<std::uint32_t>& c = acc.counts(layer);
  const std::size_t plane = m.height * m.width;
  std::vector<double> out(acc.timesteps() * m.channels, 0.0);
  if (acc.total() == 0) return out;
  const double denom = static_cast<double>(plane) * static_cast<double>(acc.total());
  for (std::size_t f = 0; f < out.size(); ++f) {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < plane; ++i) sum += c[f * plane + i];
    out[f] = static_cast<double>(sum) / denom;
  }
  return out;
}

std::vector<double> t_sfr(const SFRAccumulator& acc) {
  std::vector<double> out(acc.timesteps(), 0.0);
  if (acc.total() == 0) return out;
  std::size_t neurons = 0;
  for (const MapShape& m : acc.layers()) neurons += m.size();
  const double denom = static_cast<double>(neurons) * static_cast<double>(acc.total());
  for (std::size_t t = 0; t < acc.timesteps(); ++t) {
    std::uint64_t sum = 0;
    for (std::size_t l = 0; l < acc.layers().size(); ++l) {
      const std::size_t n = acc.layers()[l].size();
      const std::vector<std::uint32_t>& c = acc.counts(l);
      for (std::size_t i = 0; i < n; ++i) sum += c[t * n + i];
    }
    out[t] = static_cast<double>(sum) / denom;
  }
  return out;
}

double nasfr(const SFRAccumulator& acc) {
  const std::vector<double> t = t_sfr(acc);
  if (t.empty()) return 0.0;
  double sum = 0;
  for (double v : t) sum += v;
  return sum / static_cast<double>(t.size());
}

std::vector<SpikeFeature> spike_features(const SFRAccumulator& acc, std::size_t layer) {
  const MapShape& m = acc.layers().at(layer);
  const std::vector<double> rates = n_sfr(acc, layer);
  const std::size_t plane = m.height * m.width;
  std::vector<SpikeFeature> out;
  for (std::size_t t = 0; t < acc.timesteps(); ++t) {
    for (std::size_t c = 0; c < m.channels; ++c) {
      SpikeFeature f{layer, c, t, Tensor(Shape{m.height, m.width})};
      const std::size_t base = (t * m.channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) f.map[i] = static_cast<real>(rates[base + i]);
      out.push_back(std::move(f));
    }
  }
  return out;
}

double cosine_similarity(std::span<const real> a, std::span<const real> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<GhostPair> ghost_pairs(const std::vector<SpikeFeature>& features, double threshold) {
  std::vector<GhostPair> out;
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t j = i + 1; j < features.size(); ++j) {
      const double sim = cosine_similarity(features[i].map.values(), features[j].map.values());
      if (sim >= threshold) out.push_back({features[i].channel, features[j].channel, sim});
    }
  }
  return out;
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
