#pragma once

// Advanced spatial attention: importance scoring over the temporal-channel
// statistics of a layer input, complementary channel separation by top-k,
// and two independent spatial-attention branches whose refined outputs are
// summed back into a tensor of the input shape.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "spikeforge/numerics/ops.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

enum class AsaVariant { asa1, asa2 };

struct AsaParams {
  AsaVariant variant = AsaVariant::asa1;
  std::size_t timesteps = 0;
  std::size_t channels = 0;
  std::size_t reduction = 4;  // r, must divide timesteps for ASA-1
  std::size_t k = 1;          // top-k count for both selection axes

  GradPair alpha;  // (1)
  GradPair gamma;  // (1)
  GradPair w1;     // (T/r, T), ASA-1 only
  GradPair w2;     // (T, T/r), ASA-1 only
  GradPair sa1_w;  // (1, 2, 3, 3)
  GradPair sa1_b;  // (1)
  GradPair sa2_w;
  GradPair sa2_b;

  void zero_grad();
};

/// Builds parameters with alpha = gamma = 0.5, Kaiming-uniform W1/W2 and SA
/// kernels, zero SA biases. k defaults to floor(C/2), at least 1.
AsaParams make_asa_params(AsaVariant variant, std::size_t timesteps, std::size_t channels, std::size_t reduction,
                          std::mt19937_64& rng, std::optional<std::size_t> k = std::nullopt);

struct TcStats {
  Tensor avg;  // (T, C, 1, 1)
  Tensor max;
  std::vector<std::size_t> max_index;  // flat offsets into X
};

TcStats tc_stats(const Tensor& x);

struct ImportanceCache {
  Tensor m_prime;  // (T, C, 1, 1)
  Tensor hidden_pre;  // (C, T/r), ASA-1 only
  Tensor hidden;      // after ReLU
  Tensor m;           // (T, C, 1, 1)
};

Tensor combine_stats(const Tensor& f_avg, const Tensor& f_max, real alpha, real gamma);
Tensor importance_asa1(const Tensor& f_avg, const Tensor& f_max, const AsaParams& params,
                       ImportanceCache* cache = nullptr);
Tensor importance_asa2(const Tensor& f_avg, const Tensor& f_max, real alpha, real gamma);

struct MaskPair {
  Tensor m1;  // (T, C, 1, 1), entries in {0,1}
  Tensor m2;  // 1 - m1
};

/// Marks the top-k of every channel fiber (fixed t) and of every time fiber
/// (fixed c); M1 holds the positions chosen by exactly one of the two. Ties
/// go to the lower index. k is clamped to each fiber length.
MaskPair separate_channels(const Tensor& importance, std::size_t k);

struct SpatialAttentionCache {
  PoolResult max_pool;
  PoolResult avg_pool;
  Tensor stacked;  // (2, H, W): [max; avg]
  Tensor scores;   // (1, H, W)
};

/// Y * sigmoid(conv3x3([max_tc(Y); avg_tc(Y)]) + b), scores broadcast over (T, C).
Tensor spatial_attention(const Tensor& y, const Tensor& conv_w, const Tensor& conv_b,
                         SpatialAttentionCache* cache = nullptr);

struct SpatialAttentionGrads {
  Tensor grad_y;
  Tensor grad_w;
  Tensor grad_b;
};

SpatialAttentionGrads spatial_attention_backward(const Tensor& grad_out, const Tensor& y, const Tensor& conv_w,
                                                 const SpatialAttentionCache& cache);

struct AsaCache {
  TcStats stats;
  ImportanceCache importance;
  MaskPair masks;
  Tensor y1, y2;
  SpatialAttentionCache sa1, sa2;
};

struct AsaOutput {
  Tensor out;
  AsaCache cache;
};

AsaOutput asa_forward(const Tensor& x, const AsaParams& params);

/// Returns dL/dX and accumulates parameter gradients into `params`. Mask
/// selection is piecewise constant and treated as such, so the importance
/// path (alpha, gamma, W1, W2) receives exactly zero gradient.
Tensor asa_backward(const Tensor& grad_out, const AsaCache& cache, AsaParams& params);

}  // namespace spikeforge::inline SPIKEFORGE_ABI
