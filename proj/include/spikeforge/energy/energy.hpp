#pragma once

// Operation counts and the energy shift between a vanilla and an attention
// network. Spikes entering a conv (or the readout) cost one accumulate per
// synapse they reach; attention arithmetic and the first conv, which sees
// real-valued frames, cost multiply-accumulates.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spikeforge/snn_core/network.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

inline constexpr double kEnergyMacPj = 4.6;
inline constexpr double kEnergyAcPj = 0.9;

/// Output positions along one axis whose receptive field covers input `pos`.
std::uint64_t axis_fanout(std::size_t pos, std::size_t kernel, std::size_t stride, std::size_t pad,
                          std::size_t out_size);

enum class FanoutMode { exact, approx };  // approx: k^2 * C_out for every spike

/// ACs caused by a (T, C, H, W) or (C, H, W) spike map feeding a conv.
std::uint64_t count_ac_conv(const Tensor& spikes, std::size_t kernel, std::size_t stride, std::size_t pad,
                            std::size_t c_out, FanoutMode mode = FanoutMode::exact);

/// Per-module MAC terms of one ASA block for one sample.
struct AsaMacTerms {
  std::uint64_t tc_pooling = 0;  // avg and max over (H, W) per (t, c)
  std::uint64_t combine = 0;     // M' = alpha*avg + gamma*max, 3 per (t, c)
  std::uint64_t mlp = 0;         // ASA-1: C * 2 * T * (T/r)
  std::uint64_t activations = 0; // ReLU on the hidden layer, sigmoid on M
  std::uint64_t mask_mul = 0;    // X * M1 and X * M2
  std::uint64_t sa_pooling = 0;  // max and avg over (T, C), both branches
  std::uint64_t sa_conv = 0;     // 2 branches * H*W*9*2
  std::uint64_t sa_sigmoid = 0;
  std::uint64_t score_mul = 0;   // T*C*H*W per branch

  std::uint64_t total() const;
};

AsaMacTerms asa_mac_terms(AsaVariant variant, std::size_t timesteps, std::size_t channels, std::size_t height,
                          std::size_t width, std::size_t reduction);

/// MACs added by every ASA block of the network for one forward pass; 0 without ASA.
std::uint64_t count_mac_asa(const NetworkConfig& cfg);
/// MACs of the first conv for one forward pass.
std::uint64_t count_mac_input(const NetworkConfig& cfg);

struct LayerOps {
  std::string name;  // layerN or readout
  std::uint64_t ac = 0;
  std::uint64_t mac = 0;
};

struct OpCountReport {
  std::vector<LayerOps> layers;
  std::uint64_t samples = 0;

  std::uint64_t ac_total() const;
  std::uint64_t mac_total() const;
  double ac_per_sample() const;
  double mac_per_sample() const;
  void merge(const OpCountReport& other);
};

/// Counts for one recorded forward pass.
OpCountReport count_ops(const Network& net, const ForwardRecord& rec, FanoutMode mode = FanoutMode::exact);

struct EnergyReport {
  double e_mac_pj = kEnergyMacPj;
  double e_ac_pj = kEnergyAcPj;
  double delta_mac = 0;  // asa - vanilla, per sample
  double delta_ac = 0;   // vanilla - asa, per sample
  double delta_e_pj = 0;
  double vanilla_pj = 0;
  double asa_pj = 0;
  double delta_e_percent = 0;  // of the vanilla energy
};

EnergyReport delta_energy(const OpCountReport& vanilla, const OpCountReport& asa);

nlohmann::ordered_json to_json(const OpCountReport& r);
nlohmann::ordered_json to_json(const EnergyReport& r);
OpCountReport op_counts_from_json(const nlohmann::json& j);
std::string op_count_csv(const OpCountReport& vanilla, const OpCountReport& asa);

/// Published reference figures, reported beside desk-scale results.
nlohmann::ordered_json reference_rows();

/// Human-readable statement of the ASA MAC formula.
std::string asa_mac_formula();

}  // namespace spikeforge::inline SPIKEFORGE_ABI
