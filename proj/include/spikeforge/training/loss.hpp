#pragma once

#include <utility>

#include "spikeforge/numerics/tensor.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

/// Softmax cross-entropy on one logit vector. Gradient is softmax - onehot.
std::pair<real, Tensor> rate_ce_loss(const Tensor& logits, int label);

struct BatchLoss {
  double loss = 0;     // mean over the batch
  Tensor grad_logits;  // (B, K), already divided by B
  std::size_t correct = 0;
};

BatchLoss rate_ce_loss_batch(const Tensor& logits, std::span<const int> labels);

/// Index of the largest logit, lowest index on ties.
std::size_t argmax(std::span<const real> logits);

}  // namespace spikeforge::inline SPIKEFORGE_ABI
