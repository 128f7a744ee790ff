#pragma once

#include <cstddef>
#include <span>

#include "spikeforge/numerics/ops.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

/// How the forward pass turns membrane potential into spikes. `relaxed`
/// replaces the step by the clamped ramp whose derivative is exactly the
/// rectangular surrogate, which makes the whole network differentiable for
/// finite-difference checks. Training and analysis use `heaviside`.
enum class FireMode { heaviside, relaxed };

struct LIFParams {
  real v_th = real(0.5);
  real v_reset = real(0);
  real beta = real(0.25);  // decay factor; 0 is the memoryless limit
  real surrogate_width = real(1);
  FireMode fire = FireMode::heaviside;

  /// Throws std::invalid_argument unless 0 <= beta < 1 and width > 0.
  void validate() const;
};

/// U = H_prev + X.
Tensor lif_integrate(const Tensor& h_prev, const Tensor& x);
/// S = Hea(U - v_th), Hea(0) = 1.
Tensor lif_fire(const Tensor& u, real v_th);
/// H = v_reset * S + beta * U * (1 - S).
Tensor lif_leak(const Tensor& u, const Tensor& s, real v_reset, real beta);

struct LIFStepResult {
  Tensor s;
  Tensor h;
  Tensor u;  // pre-reset membrane potential
};

LIFStepResult lif_step(const Tensor& h_prev, const Tensor& x, const LIFParams& params);

/// Runs a layer of `neurons` LIF units over T timesteps in place of the
/// tensor ops above. `x`, `u`, `s` are T contiguous blocks of `neurons`.
void lif_run(std::span<const real> x, std::span<real> u, std::span<real> s, std::size_t neurons,
             const LIFParams& params);

/// Backward of lif_run: given dL/dS for every timestep, writes dL/dX.
/// Uses the recorded U and S and the rectangular surrogate for dS/dU,
/// including the reset term's dependence on S.
void lif_run_backward(std::span<const real> grad_s, std::span<const real> u, std::span<const real> s,
                      std::span<real> grad_x, std::size_t neurons, const LIFParams& params);

}  // namespace spikeforge::inline SPIKEFORGE_ABI
