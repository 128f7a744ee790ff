#include "spikeforge/training/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace spikeforge::inline SPIKEFORGE_ABI {

OptimizerSettings OptimizerSettings::from(const TrainConfig& cfg) {
  OptimizerSettings s;
  s.kind = cfg.optimizer;
  s.learning_rate = cfg.learning_rate;
  s.momentum = cfg.momentum;
  s.grad_clip = cfg.grad_clip;
  return s;
}

double grad_norm(const std::vector<GradPair*>& params) {
  double sq = 0;
  for (const GradPair* p : params) {
    for (real g : p->grad.values()) sq += static_cast<double>(g) * g;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(const std::vector<GradPair*>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0) {
    const real factor = static_cast<real>(max_norm / norm);
    for (GradPair* p : params) {
      for (real& g : p->grad.values()) g *= factor;
    }
  }
  return norm;
}

Optimizer::Optimizer(OptimizerSettings settings) : s_(settings) {
  if (!(s_.learning_rate > 0)) throw std::invalid_argument("optimizer: learning rate must be positive");
}

void Optimizer::step(const std::vector<GradPair*>& params) {
  if (m_.empty()) {
    for (const GradPair* p : params) {
      m_.emplace_back(p->value.size(), 0.0);
      if (s_.kind == OptimizerKind::adam) v_.emplace_back(p->value.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("optimizer: parameter list changed between steps");
  if (s_.grad_clip) clip_grad_norm(params, *s_.grad_clip);
  ++t_;
  const double lr = s_.learning_rate;
  const double bc1 = 1 - std::pow(s_.beta1, static_cast<double>(t_));
  const double bc2 = 1 - std::pow(s_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    GradPair& p = *params[i];
    if (p.grad.size() != m_[i].size()) throw std::invalid_argument("optimizer: parameter shape changed");
    std::vector<double>& m = m_[i];
    for (std::size_t j = 0; j < m.size(); ++j) {
      const double g = p.grad[j];
      double update;
      if (s_.kind == OptimizerKind::sgd_momentum) {
        m[j] = s_.momentum * m[j] + g;
        update = lr * m[j];
      } else {
        double& v = v_[i][j];
        m[j] = s_.beta1 * m[j] + (1 - s_.beta1) * g;
        v = s_.beta2 * v + (1 - s_.beta2) * g * g;
        update = lr * (m[j] / bc1) / (std::sqrt(v / bc2) + s_.eps);
      }
      p.value[j] = static_cast<real>(static_cast<double>(p.value[j]) - update);
    }
  }
}

std::vector<GradPair*> trainable_list(NetworkParams& params) {
  std::vector<GradPair*> out;
  params.for_each_trainable([&](const std::string&, GradPair& p) { out.push_back(&p); });
  return out;
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
