#pragma once

#include <optional>
#include <vector>

#include "spikeforge/snn_core/config.hpp"
#include "spikeforge/snn_core/network.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;  // SGD
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::optional<double> grad_clip;

  static OptimizerSettings from(const TrainConfig& cfg);
};

/// Global L2 norm over all gradients, accumulated in a fixed order.
double grad_norm(const std::vector<GradPair*>& params);

/// Rescales gradients so the global norm is at most `max_norm`. Returns the
/// norm before clipping.
double clip_grad_norm(const std::vector<GradPair*>& params, double max_norm);

class Optimizer {
 public:
  explicit Optimizer(OptimizerSettings settings);

  /// One update of every parameter from its accumulated gradient. The
  /// parameter list must keep the same order and shapes across calls.
  void step(const std::vector<GradPair*>& params);

  std::size_t steps() const noexcept { return t_; }

 private:
  OptimizerSettings s_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

std::vector<GradPair*> trainable_list(NetworkParams& params);

}  // namespace spikeforge::inline SPIKEFORGE_ABI
