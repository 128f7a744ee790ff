#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "spikeforge/event_data/events.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {
namespace {

template <typename Int>
bool parse_int(std::string_view field, Int& out) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

void validate(const Event& e, SensorGeometry g, std::size_t index) {
  if (e.x >= g.width || e.y >= g.height) {
    throw EventFormatError("event " + std::to_string(index) + ": coordinate (" + std::to_string(e.x) + "," +
                               std::to_string(e.y) + ") outside " + std::to_string(g.width) + "x" +
                               std::to_string(g.height) + " sensor",
                           index);
  }
  if (e.polarity != 1 && e.polarity != -1) {
    throw EventFormatError("event " + std::to_string(index) + ": polarity must be +1 or -1", index);
  }
}

void finalize(EventStream& s) {
  const auto by_time = [](const Event& a, const Event& b) { return a.t_us < b.t_us; };
  if (!std::is_sorted(s.events.begin(), s.events.end(), by_time)) {
    std::stable_sort(s.events.begin(), s.events.end(), by_time);
    s.resorted = true;
  }
}

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  auto u = static_cast<std::make_unsigned_t<T>>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>(u & 0xFF);
    u = static_cast<std::make_unsigned_t<T>>(u >> 8);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(const unsigned char* p) {
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) u = static_cast<std::make_unsigned_t<T>>((u << 8) | p[i]);
  return static_cast<T>(u);
}

}  // namespace

EventStream read_events_csv(std::istream& in, SensorGeometry geometry) {
  EventStream s;
  s.width = geometry.width;
  s.height = geometry.height;
  std::string line;
  std::size_t index = 0;
  bool first = true;
  while (std::getline(in, line)) {
    std::string_view view(line);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.empty() || view.front() == '#') continue;
    if (first) {
      first = false;
      if (view.rfind("t_us", 0) == 0) continue;
    }
    std::array<std::string_view, 4> fields;
    std::size_t n = 0, start = 0;
    for (std::size_t i = 0; i <= view.size() && n < 5; ++i) {
      if (i == view.size() || view[i] == ',') {
        if (n < 4) fields[n] = view.substr(start, i - start);
        ++n;
        start = i + 1;
      }
    }
    if (n != 4) throw EventFormatError("event " + std::to_string(index) + ": expected 4 columns t_us,x,y,p", index);
    std::int64_t t = 0;
    long x = 0, y = 0, p = 0;
    if (!parse_int(fields[0], t) || !parse_int(fields[1], x) || !parse_int(fields[2], y) ||
        !parse_int(fields[3], p)) {
      throw EventFormatError("event " + std::to_string(index) + ": malformed field", index);
    }
    if (x < 0 || y < 0 || x > 0xFFFF || y > 0xFFFF || t < 0) {
      throw EventFormatError("event " + std::to_string(index) + ": coordinate or timestamp out of range", index);
    }
    if (p != 1 && p != -1) throw EventFormatError("event " + std::to_string(index) + ": polarity must be +1 or -1", index);
    Event e{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), static_cast<std::int8_t>(p)};
    validate(e, geometry, index);
    s.events.push_back(e);
    ++index;
  }
  finalize(s);
  return s;
}

EventStream read_events_bin(std::istream& in, SensorGeometry geometry) {
  EventStream s;
  s.width = geometry.width;
  s.height = geometry.height;
  std::array<unsigned char, kEventHeaderBytes> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (in.gcount() != static_cast<std::streamsize>(header.size()) ||
      std::memcmp(header.data(), kEventMagic, 4) != 0) {
    throw EventFormatError("binary event file: bad magic", 0);
  }
  const auto version = get_le<std::uint32_t>(header.data() + 4);
  if (version != kEventVersion) {
    throw EventFormatError("binary event file: unsupported version " + std::to_string(version), 0);
  }
  std::array<unsigned char, kEventRecordBytes> rec{};
  std::size_t index = 0;
  while (true) {
    in.read(reinterpret_cast<char*>(rec.data()), rec.size());
    const auto got = in.gcount();
    if (got == 0) break;
    if (got != static_cast<std::streamsize>(rec.size())) {
      throw EventFormatError("event " + std::to_string(index) + ": truncated record", index);
    }
    const auto t = get_le<std::uint64_t>(rec.data());
    if (t > static_cast<std::uint64_t>(INT64_MAX)) {
      throw EventFormatError("event " + std::to_string(index) + ": timestamp out of range", index);
    }
    Event e{static_cast<std::int64_t>(t), get_le<std::uint16_t>(rec.data() + 8), get_le<std::uint16_t>(rec.data() + 10),
            static_cast<std::int8_t>(rec[12])};
    validate(e, geometry, index);
    s.events.push_back(e);
    ++index;
  }
  finalize(s);
  return s;
}

void write_events_csv(std::ostream& out, const EventStream& stream) {
  out << "t_us,x,y,p\n";
  for (const Event& e : stream.events) {
    out << e.t_us << ',' << e.x << ',' << e.y << ',' << static_cast<int>(e.polarity) << '\n';
  }
}

void write_events_bin(std::ostream& out, const EventStream& stream) {
  out.write(kEventMagic, 4);
  put_le<std::uint32_t>(out, kEventVersion);
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    if (e.t_us < 0) throw EventFormatError("event " + std::to_string(i) + ": negative timestamp", i);
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(e.t_us));
    put_le<std::uint16_t>(out, e.x);
    put_le<std::uint16_t>(out, e.y);
    put_le<std::int8_t>(out, e.polarity);
    const char pad[3] = {0, 0, 0};
    out.write(pad, 3);
  }
}

EventFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return EventFormat::csv;
  if (ext == ".bin") return EventFormat::bin;
  throw std::invalid_argument("unknown event file extension: " + path.string());
}

EventStream load_events(const std::filesystem::path& path, EventFormat format, SensorGeometry geometry) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open event file " + path.string());
  return format == EventFormat::csv ? read_events_csv(in, geometry) : read_events_bin(in, geometry);
}

void save_events(const std::filesystem::path& path, const EventStream& stream, EventFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write event file " + path.string());
  if (format == EventFormat::csv) {
    write_events_csv(out, stream);
  } else {
    write_events_bin(out, stream);
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
