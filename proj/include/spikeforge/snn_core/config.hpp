#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spikeforge/asa/asa.hpp"
#include "spikeforge/event_data/events.hpp"
#include "spikeforge/snn_core/lif.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

struct ConvLayerSpec {
  std::size_t out_channels = 16;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;
  PoolKind pool = PoolKind::max;
  std::size_t pool_window = 2;  // 1 disables pooling

  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

struct NetworkConfig {
  std::size_t in_channels = 2;
  std::size_t in_height = 32;
  std::size_t in_width = 32;
  std::size_t timesteps = 8;
  std::vector<ConvLayerSpec> layers{ConvLayerSpec{16}, ConvLayerSpec{32}};
  std::size_t num_classes = 4;
  LIFParams lif;
  bool asa_enabled = false;
  AsaVariant asa_variant = AsaVariant::asa1;
  std::size_t asa_reduction = 4;
  std::size_t asa_k = 0;  // 0 selects floor(C/2) per layer
  real bn_momentum = real(0.1);
  real bn_eps = real(1e-5);
};

enum class OptimizerKind { sgd_momentum, adam };

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double momentum = 0.9;
  std::optional<double> grad_clip = 5.0;
  std::uint64_t seed = 0;
  double dt_ms = 8;
  BinMode bin_mode = BinMode::count;
  double train_frac = 0.8;
  std::uint64_t split_seed = 0;
};

struct RunConfig {
  NetworkConfig network;
  TrainConfig train;
};

/// Parse or validation failure. `line` is 1-based, 0 when not tied to a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// `key = value` text, '#' comments. Repeated `conv` lines define the layer
/// stack in order and replace the default stack.
RunConfig parse_run_config(std::istream& in);
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string to_config_text(const RunConfig& cfg);

/// 64-bit FNV-1a of the canonical config text.
std::uint64_t config_hash(const RunConfig& cfg);
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
std::uint64_t splitmix64(std::uint64_t x);

std::string to_string(AsaVariant v);
std::string asa_mode_string(const NetworkConfig& cfg);  // off, asa1 or asa2
void set_asa_mode(NetworkConfig& cfg, const std::string& mode);  // throws std::invalid_argument

}  // namespace spikeforge::inline SPIKEFORGE_ABI
