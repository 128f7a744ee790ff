#pragma once

#include <random>

#include "spikeforge/numerics/tensor.hpp"

namespace testing_util {

using spikeforge::real;
using spikeforge::Shape;
using spikeforge::Tensor;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (real& v : t.values()) v = static_cast<real>(d(rng));
  return t;
}

inline Tensor random_binary(Shape shape, std::mt19937_64& rng, double p = 0.3) {
  Tensor t(std::move(shape));
  std::bernoulli_distribution d(p);
  for (real& v : t.values()) v = d(rng) ? real(1) : real(0);
  return t;
}

// Sum of grad * output, a linear probe loss whose gradient is `grad`.
inline double dot(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

}  // namespace testing_util
