#include "spikeforge/training/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace spikeforge::inline SPIKEFORGE_ABI {
namespace {

// Writes softmax - onehot into grad and returns the loss.
double softmax_ce(std::span<const real> z, int label, std::span<real> grad) {
  if (label < 0 || static_cast<std::size_t>(label) >= z.size()) {
    throw std::invalid_argument("rate_ce_loss: label " + std::to_string(label) + " outside [0, " +
                                std::to_string(z.size()) + ")");
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  double denom = 0;
  for (real v : z) denom += std::exp(static_cast<double>(v) - zmax);
  const double log_denom = std::log(denom);
  for (std::size_t i = 0; i < z.size(); ++i) {
    grad[i] = static_cast<real>(std::exp(static_cast<double>(z[i]) - zmax - log_denom));
  }
  grad[static_cast<std::size_t>(label)] -= real(1);
  return log_denom + zmax - static_cast<double>(z[static_cast<std::size_t>(label)]);
}

}  // namespace

std::pair<real, Tensor> rate_ce_loss(const Tensor& logits, int label) {
  require_rank(logits, 1, "rate_ce_loss logits");
  if (logits.size() == 0) throw ShapeError("rate_ce_loss: empty logits");
  Tensor grad(logits.shape());
  const double loss = softmax_ce(logits.values(), label, grad.values());
  return {static_cast<real>(loss), std::move(grad)};
}

BatchLoss rate_ce_loss_batch(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "rate_ce_loss_batch logits");
  const std::size_t b = logits.dim(0), k = logits.dim(1);
  if (labels.size() != b) throw ShapeError("rate_ce_loss_batch: label count differs from batch");
  BatchLoss out;
  out.grad_logits = Tensor(logits.shape());
  const real inv_b = real(1) / static_cast<real>(b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto z = logits.values().subspan(i * k, k);
    auto g = out.grad_logits.values().subspan(i * k, k);
    out.loss += softmax_ce(z, labels[i], g);
    for (real& v : g) v *= inv_b;
    if (argmax(z) == static_cast<std::size_t>(labels[i])) ++out.correct;
  }
  out.loss /= static_cast<double>(b);
  return out;
}

std::size_t argmax(std::span<const real> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
