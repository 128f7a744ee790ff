#include <cmath>

#include "spikeforge/event_data/events.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

FrameSequence bin_frames(const EventStream& stream, double dt_ms, std::size_t timesteps, BinMode mode,
                         std::int64_t origin_us) {
  if (!(dt_ms > 0)) throw std::invalid_argument("bin_frames: dt_ms must be positive");
  if (timesteps == 0) throw std::invalid_argument("bin_frames: need at least one frame");
  const std::size_t h = stream.height, w = stream.width;
  FrameSequence seq{Tensor(Shape{timesteps, 2, h, w}), dt_ms, timesteps};
  const double bin_us = 1000.0 * dt_ms;
  for (const Event& e : stream.events) {
    const std::int64_t rel = e.t_us - origin_us;
    if (rel < 0) continue;
    const double idx = std::floor(static_cast<double>(rel) / bin_us);
    if (idx >= static_cast<double>(timesteps)) continue;
    const std::size_t t = static_cast<std::size_t>(idx);
    const std::size_t channel = e.polarity > 0 ? 0 : 1;
    real& cell = seq.frames[((t * 2 + channel) * h + e.y) * w + e.x];
    cell = mode == BinMode::count ? cell + real(1) : real(1);
  }
  return seq;
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
