#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "spikeforge/event_data/events.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {
namespace {

bool horizontal(Direction d) { return d == Direction::right || d == Direction::left; }
bool reversed(Direction d) { return d == Direction::left || d == Direction::up; }

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Maps (travel, perpendicular) coordinates of the canonical forward-moving
// frame onto sensor (x, y).
std::pair<std::uint16_t, std::uint16_t> to_sensor(const BarTrajectory& bar, std::size_t travel, std::size_t perp) {
  const std::size_t extent = horizontal(bar.direction) ? bar.width : bar.height;
  const std::size_t along = reversed(bar.direction) ? extent - 1 - travel : travel;
  if (horizontal(bar.direction)) return {static_cast<std::uint16_t>(along), static_cast<std::uint16_t>(perp)};
  return {static_cast<std::uint16_t>(perp), static_cast<std::uint16_t>(along)};
}

}  // namespace

bool BarTrajectory::covers(const Event& e, double tolerance_px) const {
  const std::size_t extent = horizontal(direction) ? width : height;
  std::size_t along = horizontal(direction) ? e.x : e.y;
  const std::size_t perp = horizontal(direction) ? e.y : e.x;
  if (reversed(direction)) along = extent - 1 - along;
  if (perp < offset || perp >= offset + length) return false;
  const double trailing = start + speed * (static_cast<double>(e.t_us) / 1000.0);
  const double c = static_cast<double>(along);
  return c >= trailing - tolerance_px && c <= trailing + thickness + tolerance_px;
}

SynthSample synth_motion_sample(const SynthParams& params, std::size_t index) {
  if (params.height < 16 || params.width < 16) throw std::invalid_argument("synth: sensor must be at least 16x16");
  if (params.classes == 0 || params.classes > 4) throw std::invalid_argument("synth: supports 1 to 4 classes");
  if (!(params.duration_ms > 0)) throw std::invalid_argument("synth: duration must be positive");

  std::mt19937_64 rng(params.seed + index);
  SynthSample sample;
  EventStream& s = sample.stream;
  s.width = params.width;
  s.height = params.height;
  s.label = static_cast<int>(index % params.classes);

  BarTrajectory& bar = sample.bar;
  bar.direction = static_cast<Direction>(index % params.classes);
  bar.width = params.width;
  bar.height = params.height;
  const std::size_t extent = horizontal(bar.direction) ? params.width : params.height;
  const std::size_t perp_extent = horizontal(bar.direction) ? params.height : params.width;
  bar.thickness = static_cast<double>(uniform_int(rng, 3, 4));
  bar.length = uniform_int(rng, perp_extent / 3, perp_extent / 2);
  bar.offset = uniform_int(rng, 0, perp_extent - bar.length);
  bar.start = uniform(rng, 1.0, 0.15 * static_cast<double>(extent));
  const double travel = uniform(rng, 0.55, 0.7) * static_cast<double>(extent);
  bar.speed = travel / params.duration_ms;

  const auto duration_us = static_cast<std::int64_t>(std::llround(params.duration_ms * 1000.0));
  const auto emit_edges = [&](double edge_at_zero, std::int8_t polarity) {
    // The edge sweeps pixel column c when edge_at_zero + speed * t == c.
    const double end = edge_at_zero + travel;
    for (auto c = static_cast<long>(std::ceil(edge_at_zero)); c <= static_cast<long>(std::floor(end)); ++c) {
      if (c < 0 || c >= static_cast<long>(extent)) continue;
      const double t_ms = (static_cast<double>(c) - edge_at_zero) / bar.speed;
      for (std::size_t p = bar.offset; p < bar.offset + bar.length; ++p) {
        if (uniform(rng, 0.0, 1.0) >= 0.9) continue;
        auto t_us = static_cast<std::int64_t>(std::floor(t_ms * 1000.0)) +
                    static_cast<std::int64_t>(uniform_int(rng, 0, 200));
        t_us = std::clamp<std::int64_t>(t_us, 0, duration_us - 1);
        const auto [x, y] = to_sensor(bar, static_cast<std::size_t>(c), p);
        s.events.push_back({t_us, x, y, polarity});
      }
    }
  };
  emit_edges(bar.start + bar.thickness, 1);
  emit_edges(bar.start, -1);

  NoisePatch& patch = sample.patch;
  patch.size = std::max<std::size_t>(4, std::min(params.width, params.height) / 4);
  patch.x0 = uniform_int(rng, 0, params.width - patch.size);
  patch.y0 = uniform_int(rng, 0, params.height - patch.size);
  if (params.noise_density > 0) {
    // Half the patch pixels are textured and flicker at twice the mean density,
    // alternating polarity with each event.
    const double rate = std::min(1.0, 2.0 * params.noise_density);
    const auto ticks = static_cast<std::int64_t>(std::ceil(params.duration_ms));
    for (std::size_t py = 0; py < patch.size; ++py) {
      for (std::size_t px = 0; px < patch.size; ++px) {
        const bool textured = uniform(rng, 0.0, 1.0) < 0.5;
        std::int8_t polarity = uniform(rng, 0.0, 1.0) < 0.5 ? 1 : -1;
        if (!textured) continue;
        for (std::int64_t m = 0; m < ticks; ++m) {
          if (uniform(rng, 0.0, 1.0) >= rate) continue;
          const std::int64_t t_us =
              std::min<std::int64_t>(m * 1000 + static_cast<std::int64_t>(uniform_int(rng, 0, 999)), duration_us - 1);
          s.events.push_back({t_us, static_cast<std::uint16_t>(patch.x0 + px),
                              static_cast<std::uint16_t>(patch.y0 + py), polarity});
          polarity = static_cast<std::int8_t>(-polarity);
        }
      }
    }
  }

  std::sort(s.events.begin(), s.events.end(), [](const Event& a, const Event& b) {
    if (a.t_us != b.t_us) return a.t_us < b.t_us;
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.polarity < b.polarity;
  });
  return sample;
}

std::vector<EventStream> synth_motion_dataset(const SynthParams& params) {
  std::vector<EventStream> out;
  const std::size_t n = params.n_per_class * params.classes;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(synth_motion_sample(params, i).stream);
  return out;
}

SplitIndices split_indices(const std::vector<int>& labels, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0 && train_frac < 1)) throw std::invalid_argument("split: train_frac must lie in (0,1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  SplitIndices split;
  std::mt19937_64 rng(seed);
  for (auto& [label, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(members.size())));
    split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<long>(n_train));
    split.test.insert(split.test.end(), members.begin() + static_cast<long>(n_train), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::pair<std::vector<EventStream>, std::vector<EventStream>> split_dataset(const std::vector<EventStream>& streams,
                                                                            double train_frac, std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(streams.size());
  for (const auto& s : streams) labels.push_back(s.label.value_or(-1));
  const SplitIndices idx = split_indices(labels, train_frac, seed);
  std::pair<std::vector<EventStream>, std::vector<EventStream>> out;
  for (std::size_t i : idx.train) out.first.push_back(streams[i]);
  for (std::size_t i : idx.test) out.second.push_back(streams[i]);
  return out;
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
