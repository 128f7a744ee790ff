#pragma once

// Checkpoint file:
//   "SFCK" | u32 version | u64 manifest bytes | manifest JSON | f32 payload
// The manifest echoes the run config and lists every tensor by name with
// its shape and byte offset into the payload. All integers little-endian.

#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "spikeforge/snn_core/network.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  RunConfig config;
  NetworkParams params;
  nlohmann::json meta;  // free-form run information (accuracy, hashes)
};

void save_checkpoint(const std::filesystem::path& path, const RunConfig& cfg, NetworkParams& params,
                     const nlohmann::json& meta = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spikeforge::inline SPIKEFORGE_ABI
