#include "spikeforge/analysis/mpd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spikeforge::inline SPIKEFORGE_ABI {
namespace {

constexpr long double kScale = 16777216.0L;  // 2^24

std::int64_t fixed(real v) {
  if (!std::isfinite(v)) throw std::invalid_argument("analysis: non-finite membrane potential");
  return std::llround(static_cast<long double>(v) * kScale);
}

std::size_t bin_of(real v, const HistogramRange& r) {
  const double pos = (static_cast<double>(v) - r.lo) / (r.hi - r.lo) * static_cast<double>(r.bins);
  if (!(pos >= 0)) return 0;
  return std::min(static_cast<std::size_t>(pos), r.bins - 1);
}

void validate(const HistogramRange& r) {
  if (r.bins == 0 || !(r.hi > r.lo)) throw std::invalid_argument("mpd: need bins >= 1 and hi > lo");
}

std::vector<double> edges(const HistogramRange& r) {
  std::vector<double> e(r.bins + 1);
  const double width = (r.hi - r.lo) / static_cast<double>(r.bins);
  for (std::size_t i = 0; i <= r.bins; ++i) e[i] = r.lo + width * static_cast<double>(i);
  e[r.bins] = r.hi;
  return e;
}

void moments(wide_int sum, wide_int sum_sq, std::uint64_t n, double& mean, double& variance) {
  if (n == 0) {
    mean = variance = 0;
    return;
  }
  const long double nn = static_cast<long double>(n);
  const long double mq = static_cast<long double>(sum) / nn;
  const long double var_q = static_cast<long double>(sum_sq) / nn - mq * mq;
  mean = static_cast<double>(mq / kScale);
  variance = static_cast<double>(std::max(var_q, 0.0L) / (kScale * kScale));
}

}  // namespace

HistogramRange HistogramRange::around(double v_th, std::size_t bins, double half_width) {
  return HistogramRange{bins, v_th - half_width, v_th + half_width};
}

MPDHistogram mpd(std::span<const real> values, const HistogramRange& range) {
  validate(range);
  if (values.empty()) throw std::invalid_argument("mpd: need at least one value");
  MPDHistogram h;
  h.bin_edges = edges(range);
  h.counts.assign(range.bins, 0);
  wide_int sum = 0, sum_sq = 0;
  for (real v : values) {
    const std::int64_t q = fixed(v);
    sum += q;
    sum_sq += static_cast<wide_int>(q) * q;
    ++h.counts[bin_of(v, range)];
  }
  h.n = values.size();
  moments(sum, sum_sq, h.n, h.mean, h.variance);
  return h;
}

MPDAccumulator::MPDAccumulator(std::vector<MapShape> layers, std::size_t timesteps, HistogramRange range)
    : layers_(std::move(layers)), timesteps_(timesteps), range_(range) {
  validate(range_);
  for (const MapShape& m : layers_) {
    cells_.emplace_back(timesteps_ * m.channels, Cell{std::vector<std::uint64_t>(range_.bins, 0), 0, 0, 0});
  }
}

void MPDAccumulator::add(std::size_t layer, const Tensor& u) {
  const MapShape& m = layers_.at(layer);
  require_shape(u, Shape{timesteps_, m.channels, m.height, m.width}, "mpd potentials");
  const std::size_t plane = m.height * m.width;
  std::vector<Cell>& cells = cells_[layer];
  for (std::size_t f = 0; f < cells.size(); ++f) {
    Cell& cell = cells[f];
    for (std::size_t i = 0; i < plane; ++i) {
      const real v = u[f * plane + i];
      const std::int64_t q = fixed(v);
      cell.sum += q;
      cell.sum_sq += static_cast<wide_int>(q) * q;
      ++cell.counts[bin_of(v, range_)];
    }
    cell.n += plane;
  }
}

void MPDAccumulator::merge(const MPDAccumulator& other) {
  if (other.cells_.size() != cells_.size() || other.range_.bins != range_.bins || other.range_.lo != range_.lo ||
      other.range_.hi != range_.hi) {
    throw std::invalid_argument("mpd: cannot merge accumulators with different layouts");
  }
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    for (std::size_t f = 0; f < cells_[l].size(); ++f) {
      Cell& a = cells_[l][f];
      const Cell& b = other.cells_[l][f];
      for (std::size_t i = 0; i < a.counts.size(); ++i) a.counts[i] += b.counts[i];
      a.sum += b.sum;
      a.sum_sq += b.sum_sq;
      a.n += b.n;
    }
  }
}

MPDHistogram MPDAccumulator::histogram(std::size_t layer, std::size_t channel, std::size_t timestep) const {
  const MapShape& m = layers_.at(layer);
  if (channel >= m.channels || timestep >= timesteps_) throw std::out_of_range("mpd: cell out of range");
  const Cell& cell = cells_[layer][timestep * m.channels + channel];
  MPDHistogram h;
  h.layer = layer;
  h.channel = channel;
  h.timestep = timestep;
  h.bin_edges = edges(range_);
  h.counts = cell.counts;
  h.n = cell.n;
  moments(cell.sum, cell.sum_sq, cell.n, h.mean, h.variance);
  return h;
}

double ptd(const MPDHistogram& h, double v_th) {
  const std::size_t bins = h.counts.size();
  if (bins < 3) throw std::invalid_argument("ptd: need at least 3 bins");
  if (h.bin_edges.size() != bins + 1) throw std::invalid_argument("ptd: edge count must be bins + 1");
  std::vector<std::size_t> order(bins);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return h.counts[a] > h.counts[b]; });
  double center = 0;
  for (std::size_t i = 0; i < 3; ++i) center += 0.5 * (h.bin_edges[order[i]] + h.bin_edges[order[i] + 1]);
  return center / 3.0 - v_th;
}

std::string to_string(Pattern p) {
  switch (p) {
    case Pattern::noise: return "noise";
    case Pattern::normal: return "normal";
    case Pattern::null: return "null";
  }
  return "?";
}

Pattern classify_pattern(double ptd_value, double c_sfr_value, double eps_ptd) {
  if (c_sfr_value == 0) return Pattern::null;
  return ptd_value >= -eps_ptd ? Pattern::noise : Pattern::normal;
}

QEAccumulator::QEAccumulator(std::size_t layers) : sums_(layers, 0), counts_(layers, 0) {}

void QEAccumulator::add(std::size_t layer, const Tensor& u, const Tensor& s) {
  if (!u.same_shape(s)) throw ShapeError("qe: U and S shapes differ");
  wide_int& acc = sums_.at(layer);
  const std::int64_t one = std::llround(kScale);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const std::int64_t d = fixed(u[i]) - (s[i] != real(0) ? one : 0);
    acc += static_cast<wide_int>(d) * d;
  }
  counts_[layer] += u.size();
}

void QEAccumulator::add(const ForwardRecord& rec) {
  if (rec.layers.size() != sums_.size()) throw ShapeError("qe: record has the wrong number of layers");
  for (std::size_t l = 0; l < sums_.size(); ++l) add(l, rec.layers[l].u, rec.layers[l].s);
}

void QEAccumulator::merge(const QEAccumulator& other) {
  if (other.sums_.size() != sums_.size()) throw std::invalid_argument("qe: layer count mismatch in merge");
  for (std::size_t l = 0; l < sums_.size(); ++l) {
    sums_[l] += other.sums_[l];
    counts_[l] += other.counts_[l];
  }
}

double QEAccumulator::layer_qe(std::size_t layer) const {
  if (counts_.at(layer) == 0) return 0.0;
  return static_cast<double>(static_cast<long double>(sums_[layer]) / counts_[layer] / (kScale * kScale));
}

double QEAccumulator::overall() const {
  wide_int sum = 0;
  std::uint64_t n = 0;
  for (std::size_t l = 0; l < sums_.size(); ++l) {
    sum += sums_[l];
    n += counts_[l];
  }
  if (n == 0) return 0.0;
  return static_cast<double>(static_cast<long double>(sum) / n / (kScale * kScale));
}

double quantization_error(std::span<const Tensor* const> u, std::span<const Tensor* const> s) {
  if (u.size() != s.size()) throw ShapeError("quantization_error: U and S counts differ");
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (!u[k]->same_shape(*s[k])) throw ShapeError("quantization_error: U and S shapes differ");
    for (std::size_t i = 0; i < u[k]->size(); ++i) {
      const double d = static_cast<double>((*u[k])[i]) - static_cast<double>((*s[k])[i]);
      sum += d * d;
    }
    n += u[k]->size();
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
