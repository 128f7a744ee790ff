#include "spikeforge/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace spikeforge::inline SPIKEFORGE_ABI {
namespace {

constexpr char kMagic[4] = {'S', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename U>
void put_le(std::ostream& out, U v) {
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, sizeof(U));
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

struct Entry {
  Shape shape;
  std::size_t offset;
};

template <typename F>
void for_each_tensor(NetworkParams& params, F&& f) {
  params.for_each_trainable([&](const std::string& name, GradPair& p) { f(name, p.value, "param"); });
  params.for_each_buffer([&](const std::string& name, Tensor& t) { f(name, t, "buffer"); });
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const RunConfig& cfg, NetworkParams& params,
                     const nlohmann::json& meta) {
  nlohmann::json manifest;
  manifest["config"] = to_config_text(cfg);
  manifest["meta"] = meta;
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for_each_tensor(params, [&](const std::string& name, const Tensor& t, const char* kind) {
    tensors.push_back({{"name", name}, {"kind", kind}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size() * sizeof(float);
  });
  manifest["tensors"] = std::move(tensors);
  manifest["payload_bytes"] = offset;
  const std::string text = manifest.dump(1);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for_each_tensor(params, [&](const std::string&, const Tensor& t, const char*) {
    for (real v : t.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  });
  if (!out) throw CheckpointError("short write on checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(path.string() + ": not a checkpoint (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kVersion) throw CheckpointError(path.string() + ": unsupported version " + std::to_string(version));
  const auto manifest_len = get_le<std::uint64_t>(bytes.data() + 8);
  if (manifest_len > bytes.size() - 16) throw CheckpointError(path.string() + ": truncated manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": bad manifest: " + e.what());
  }
  const unsigned char* payload = bytes.data() + 16 + manifest_len;
  const std::size_t payload_size = bytes.size() - 16 - manifest_len;

  Checkpoint ck;
  try {
    ck.config = parse_run_config(manifest.at("config").get<std::string>());
    ck.meta = manifest.value("meta", nlohmann::json::object());
    std::map<std::string, Entry> dir;
    for (const auto& t : manifest.at("tensors")) {
      dir[t.at("name").get<std::string>()] = Entry{t.at("shape").get<Shape>(), t.at("offset").get<std::size_t>()};
    }
    ck.params = init_network(ck.config.network, ck.config.train.seed);
    for_each_tensor(ck.params, [&](const std::string& name, Tensor& t, const char*) {
      const auto it = dir.find(name);
      if (it == dir.end()) throw CheckpointError(path.string() + ": missing tensor " + name);
      if (it->second.shape != t.shape()) {
        throw CheckpointError(path.string() + ": tensor " + name + " has shape " + shape_string(it->second.shape) +
                              ", expected " + shape_string(t.shape()));
      }
      const std::size_t off = it->second.offset;
      if (off > payload_size || t.size() * sizeof(float) > payload_size - off) {
        throw CheckpointError(path.string() + ": tensor " + name + " runs past the payload");
      }
      for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<real>(std::bit_cast<float>(get_le<std::uint32_t>(payload + off + i * sizeof(float))));
      }
    });
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": bad manifest: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(path.string() + ": bad embedded config: " + e.what());
  }
  return ck;
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
