#pragma once

// Forward and backward kernels for the handful of operators the spiking
// network needs. Every function is pure except batch_norm in train mode,
// which updates the RunningStats it is handed.

#include <cstddef>
#include <functional>
#include <vector>

#include "spikeforge/numerics/tensor.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

// ---------------------------------------------------------------- conv2d

struct ConvOptions {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

/// Cross-correlation with zero padding. `x` is (C_in,H,W) or (N,C_in,H,W);
/// `w` is (C_out,C_in,k,k). The output keeps the batch axis if present.
Tensor conv2d(const Tensor& x, const Tensor& w, ConvOptions opts);
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, ConvOptions opts);

struct ConvGrads {
  Tensor grad_x;  // empty when not requested
  Tensor grad_w;
  Tensor grad_bias;
};

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w, ConvOptions opts,
                          bool need_grad_x = true);

// ------------------------------------------------------------ batch norm

enum class NormMode { train, eval };

/// Per-channel running statistics. Variance is stored biased so that a
/// momentum-1 update makes eval mode reproduce the batch it was fed.
struct RunningStats {
  Tensor mean;
  Tensor var;
  real momentum = real(0.1);

  RunningStats() = default;
  explicit RunningStats(std::size_t channels, real momentum = real(0.1))
      : mean(Shape{channels}, real(0)), var(Shape{channels}, real(1)), momentum(momentum) {}
};

struct BatchNormCache {
  NormMode mode = NormMode::eval;
  Tensor x_hat;
  std::vector<real> inv_std;
};

struct BatchNormResult {
  Tensor y;
  BatchNormCache cache;
};

/// `x` is (B,C,H,W); statistics are taken per channel over B, H and W.
BatchNormResult batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, NormMode mode,
                           RunningStats& stats, real eps);

struct BatchNormGrads {
  Tensor grad_x;
  Tensor grad_gamma;
  Tensor grad_beta;
};

BatchNormGrads batch_norm_backward(const Tensor& grad_y, const BatchNormCache& cache, const Tensor& gamma);

// ---------------------------------------------------------------- linear

/// Matrix product over the trailing dimension: (...,D_in) x (D_out,D_in)^T.
Tensor linear(const Tensor& x, const Tensor& w);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

struct LinearGrads {
  Tensor grad_x;
  Tensor grad_w;
  Tensor grad_bias;
};

LinearGrads linear_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w);

// --------------------------------------------------------------- pooling

enum class PoolKind { avg, max };

struct PoolResult {
  Tensor out;
  Shape input_shape;
  std::vector<std::size_t> argmax;  // flat input offset per output element, max pooling only
};

/// Global reduction over the two trailing axes: (...,H,W) -> (...,1,1).
PoolResult pool_spatial(const Tensor& x, PoolKind kind);
Tensor pool_spatial_backward(const Tensor& grad_out, const PoolResult& fwd, PoolKind kind);

/// Per-pixel reduction over the leading two axes: (T,C,H,W) -> (1,1,H,W).
PoolResult pool_tc(const Tensor& x, PoolKind kind);
Tensor pool_tc_backward(const Tensor& grad_out, const PoolResult& fwd, PoolKind kind);

/// Non-overlapping window pooling on the trailing two axes, stride == window.
PoolResult pool2d(const Tensor& x, std::size_t window, PoolKind kind);
Tensor pool2d_backward(const Tensor& grad_out, const PoolResult& fwd, PoolKind kind);

// ---------------------------------------------------------- activations

struct SpikeResult {
  Tensor spike;
  Tensor pseudo_grad;
};

/// Heaviside firing with Hea(0) = 1 and the rectangular surrogate
/// (1/a) * 1(|u - v_th| < a/2) as its pseudo-derivative.
SpikeResult surrogate_heaviside(const Tensor& u, real v_th, real width);

inline real heaviside(real u, real v_th) { return (u - v_th >= real(0)) ? real(1) : real(0); }

inline real rect_surrogate(real u, real v_th, real width) {
  const real d = u - v_th;
  return (d < width / 2 && d > -width / 2) ? real(1) / width : real(0);
}

/// Antiderivative of the rectangular surrogate: a clamped ramp. Used in
/// place of the step when a network must be differentiable end to end.
inline real relaxed_spike(real u, real v_th, real width) {
  const real s = (u - v_th) / width + real(0.5);
  return s < real(0) ? real(0) : (s > real(1) ? real(1) : s);
}

real sigmoid(real x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

// ------------------------------------------------------------ grad check

/// Central-difference check of `analytic` against f at x. Returns the
/// maximum over elements of |a - n| / max(|a|, |n|, 1e-6).
double grad_check(const std::function<double(const Tensor&)>& f, const Tensor& x, const Tensor& analytic,
                  double eps);

/// Same check, perturbing `param` in place and restoring it afterwards.
double grad_check_inplace(const std::function<double()>& f, Tensor& param, const Tensor& analytic, double eps);

}  // namespace spikeforge::inline SPIKEFORGE_ABI
