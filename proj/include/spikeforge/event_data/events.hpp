#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "spikeforge/numerics/tensor.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

struct Event {
  std::int64_t t_us = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t polarity = 1;  // +1 or -1

  friend bool operator==(const Event&, const Event&) = default;
};

struct SensorGeometry {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
};

struct EventStream {
  std::vector<Event> events;  // non-decreasing t_us
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::optional<int> label;
  bool resorted = false;  // set when the source was not time-ordered

  SensorGeometry geometry() const { return {width, height}; }
};

enum class EventFormat { csv, bin };

/// Raised for malformed input; `record_index` is the zero-based event index.
class EventFormatError : public std::runtime_error {
 public:
  EventFormatError(const std::string& what, std::size_t record_index)
      : std::runtime_error(what), record_index_(record_index) {}
  std::size_t record_index() const noexcept { return record_index_; }

 private:
  std::size_t record_index_;
};

// Binary layout: "SFEV" magic, u32 version, then 16-byte little-endian
// records (u64 t_us, u16 x, u16 y, i8 polarity, 3 zero pad bytes).
inline constexpr char kEventMagic[4] = {'S', 'F', 'E', 'V'};
inline constexpr std::uint32_t kEventVersion = 1;
inline constexpr std::size_t kEventHeaderBytes = 8;
inline constexpr std::size_t kEventRecordBytes = 16;

EventStream read_events_csv(std::istream& in, SensorGeometry geometry);
EventStream read_events_bin(std::istream& in, SensorGeometry geometry);
void write_events_csv(std::ostream& out, const EventStream& stream);
void write_events_bin(std::ostream& out, const EventStream& stream);

EventFormat format_from_path(const std::filesystem::path& path);
EventStream load_events(const std::filesystem::path& path, EventFormat format, SensorGeometry geometry);
void save_events(const std::filesystem::path& path, const EventStream& stream, EventFormat format);

// ------------------------------------------------------------ binning

enum class BinMode { count, binary };

/// Frames (T, 2, H, W); channel 0 holds positive, channel 1 negative events.
struct FrameSequence {
  Tensor frames;
  double dt_ms = 0;
  std::size_t timesteps = 0;
};

/// Event e lands in frame floor((t - origin) / (1000 dt)); events outside
/// [origin, origin + dt * T ms) are dropped. Boundary events go to the later frame.
FrameSequence bin_frames(const EventStream& stream, double dt_ms, std::size_t timesteps,
                         BinMode mode = BinMode::count, std::int64_t origin_us = 0);

// ------------------------------------------------------ synthetic data

enum class Direction { right = 0, left = 1, down = 2, up = 3 };

struct SynthParams {
  std::size_t n_per_class = 10;
  std::size_t classes = 4;
  std::uint16_t height = 32;
  std::uint16_t width = 32;
  double duration_ms = 64;
  double noise_density = 0.02;  // events per patch pixel per ms
  std::uint64_t seed = 0;
};

/// Ground truth for the moving bar of one sample.
struct BarTrajectory {
  Direction direction = Direction::right;
  double start = 0;      // travel-axis coordinate of the trailing edge at t = 0
  double speed = 0;      // pixels per ms along the travel direction
  double thickness = 0;  // along the travel axis
  std::size_t offset = 0;  // first covered pixel on the perpendicular axis
  std::size_t length = 0;  // pixels covered on the perpendicular axis
  std::uint16_t width = 0;
  std::uint16_t height = 0;

  /// True when the event lies on the bar swept rectangle at its timestamp,
  /// dilated by `tolerance_px` along the travel axis.
  bool covers(const Event& e, double tolerance_px) const;
};

struct NoisePatch {
  std::size_t x0 = 0, y0 = 0, size = 0;
};

struct SynthSample {
  EventStream stream;
  BarTrajectory bar;
  NoisePatch patch;
};

/// Sample `index` of the dataset: class = index % classes, seed = seed + index.
SynthSample synth_motion_sample(const SynthParams& params, std::size_t index);
std::vector<EventStream> synth_motion_dataset(const SynthParams& params);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified by label, deterministic given seed. Ascending index order.
SplitIndices split_indices(const std::vector<int>& labels, double train_frac, std::uint64_t seed);
std::pair<std::vector<EventStream>, std::vector<EventStream>> split_dataset(const std::vector<EventStream>& streams,
                                                                            double train_frac, std::uint64_t seed);

}  // namespace spikeforge::inline SPIKEFORGE_ABI
