#pragma once

// Conv-BN-LIF network: each block computes X = BN(Conv(W, S_prev)),
// optionally refines it with ASA, integrates it through LIF neurons over
// all timesteps and pools the resulting spikes for the next block. The
// readout is a linear layer on the time-averaged spikes of the last block.
//
// Batches are laid out as (B*T, C, H, W) with index b*T + t, so a sample's
// timesteps are contiguous.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spikeforge/asa/asa.hpp"
#include "spikeforge/event_data/events.hpp"
#include "spikeforge/snn_core/config.hpp"
#include "spikeforge/snn_core/lif.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

struct LayerGeometry {
  ConvLayerSpec spec;
  std::size_t in_c = 0, in_h = 0, in_w = 0;
  std::size_t out_c = 0, out_h = 0, out_w = 0;  // conv output, where the LIF neurons live
  std::size_t pooled_h = 0, pooled_w = 0;

  std::size_t neurons() const { return out_c * out_h * out_w; }
  std::size_t pooled_size() const { return out_c * pooled_h * pooled_w; }
};

/// Validates the layer chain; throws ConfigError on any inconsistency.
std::vector<LayerGeometry> plan_layers(const NetworkConfig& cfg);

struct LayerParams {
  GradPair conv_w;  // (C_out, C_in, k, k)
  GradPair bn_gamma;
  GradPair bn_beta;
  RunningStats bn_stats;
  std::optional<AsaParams> asa;
};

struct NetworkParams {
  std::vector<LayerParams> layers;
  GradPair readout_w;  // (classes, features)
  GradPair readout_b;

  void zero_grad();

  /// Visits every trainable tensor with a stable name, in a fixed order.
  template <typename F>
  void for_each_trainable(F&& f) {
    for (std::size_t n = 0; n < layers.size(); ++n) {
      const std::string p = "layer" + std::to_string(n) + ".";
      LayerParams& l = layers[n];
      f(p + "conv_w", l.conv_w);
      f(p + "bn_gamma", l.bn_gamma);
      f(p + "bn_beta", l.bn_beta);
      if (l.asa) {
        AsaParams& a = *l.asa;
        f(p + "asa.alpha", a.alpha);
        f(p + "asa.gamma", a.gamma);
        if (a.variant == AsaVariant::asa1) {
          f(p + "asa.w1", a.w1);
          f(p + "asa.w2", a.w2);
        }
        f(p + "asa.sa1_w", a.sa1_w);
        f(p + "asa.sa1_b", a.sa1_b);
        f(p + "asa.sa2_w", a.sa2_w);
        f(p + "asa.sa2_b", a.sa2_b);
      }
    }
    f(std::string("readout.w"), readout_w);
    f(std::string("readout.b"), readout_b);
  }

  /// Visits the non-trainable running statistics.
  template <typename F>
  void for_each_buffer(F&& f) {
    for (std::size_t n = 0; n < layers.size(); ++n) {
      const std::string p = "layer" + std::to_string(n) + ".";
      f(p + "bn_running_mean", layers[n].bn_stats.mean);
      f(p + "bn_running_var", layers[n].bn_stats.var);
    }
  }
};

/// Deterministic initialization. Every tensor draws from its own stream
/// keyed by (seed, name), so vanilla and ASA networks built from the same
/// seed share identical conv, BN and readout parameters.
NetworkParams init_network(const NetworkConfig& cfg, std::uint64_t seed);

/// Hash of the parameters common to vanilla and ASA networks.
std::uint64_t shared_init_hash(NetworkParams& params);

/// Per-sample trace of one forward pass, each tensor (T, C, H, W).
struct ForwardRecord {
  struct Layer {
    Tensor x;       // input current fed to integration (post BN, or post ASA)
    Tensor u;       // post-integration, pre-reset membrane potential
    Tensor s;       // spikes
    Tensor pooled;  // pooled spikes consumed by the next layer
  };
  std::vector<Layer> layers;
  Tensor logits;  // (classes)
};

struct LayerTrace {
  Tensor input;  // (B*T, C_in, H, W)
  BatchNormCache bn;
  std::vector<AsaCache> asa;  // one per sample when ASA is enabled
  Tensor current;
  Tensor u;
  Tensor s;
  PoolResult pooled;
};

struct BatchTrace {
  std::size_t batch = 0;
  NormMode mode = NormMode::eval;
  std::vector<LayerTrace> layers;
  Tensor features;  // (B, D) time-averaged pooled spikes of the last layer
  Tensor logits;    // (B, classes)
};

/// BN(Conv(W, S_prev)). In debug builds rejects non-binary spike input when
/// `binary_input` is set.
BatchNormResult conv_block(const Tensor& s_prev, const Tensor& w, const Tensor& gamma, const Tensor& beta,
                           RunningStats& stats, NormMode mode, ConvOptions opts, real eps, bool binary_input);

class Network {
 public:
  explicit Network(NetworkConfig cfg);

  const NetworkConfig& config() const noexcept { return cfg_; }
  const std::vector<LayerGeometry>& geometry() const noexcept { return geometry_; }
  std::size_t feature_size() const;

  /// `frames` is (B, T, C_in, H, W). Train mode updates BN running stats.
  BatchTrace forward(NetworkParams& params, const Tensor& frames, NormMode mode) const;

  /// Backpropagation through time. Accumulates dL/dparams into params' grads.
  void bptt(NetworkParams& params, const BatchTrace& trace, const Tensor& grad_logits) const;

  ForwardRecord record(const BatchTrace& trace, std::size_t sample) const;

 private:
  NetworkConfig cfg_;
  std::vector<LayerGeometry> geometry_;
};

/// Stacks frame sequences into a (B, T, C, H, W) batch.
Tensor stack_frames(std::span<const FrameSequence* const> seqs);

/// Single-sample eval-mode forward.
std::pair<Tensor, std::optional<ForwardRecord>> network_forward(const Network& net, NetworkParams& params,
                                                                const FrameSequence& frames, bool record);

}  // namespace spikeforge::inline SPIKEFORGE_ABI
