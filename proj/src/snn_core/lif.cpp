#include "spikeforge/snn_core/lif.hpp"

#include <stdexcept>
#include <vector>

namespace spikeforge::inline SPIKEFORGE_ABI {

void LIFParams::validate() const {
  if (!(beta >= real(0) && beta < real(1))) throw std::invalid_argument("lif: beta must lie in [0, 1)");
  if (!(surrogate_width > real(0))) throw std::invalid_argument("lif: surrogate width must be positive");
}

Tensor lif_integrate(const Tensor& h_prev, const Tensor& x) { return add(h_prev, x); }

Tensor lif_fire(const Tensor& u, real v_th) {
  Tensor s(u.shape());
  for (std::size_t i = 0; i < u.size(); ++i) s[i] = heaviside(u[i], v_th);
  return s;
}

Tensor lif_leak(const Tensor& u, const Tensor& s, real v_reset, real beta) {
  require_shape(s, u.shape(), "lif_leak");
  Tensor h(u.shape());
  for (std::size_t i = 0; i < u.size(); ++i) h[i] = v_reset * s[i] + (beta * u[i]) * (real(1) - s[i]);
  return h;
}

LIFStepResult lif_step(const Tensor& h_prev, const Tensor& x, const LIFParams& params) {
  LIFStepResult r;
  r.u = lif_integrate(h_prev, x);
  if (params.fire == FireMode::heaviside) {
    r.s = lif_fire(r.u, params.v_th);
  } else {
    r.s = Tensor(r.u.shape());
    for (std::size_t i = 0; i < r.u.size(); ++i) r.s[i] = relaxed_spike(r.u[i], params.v_th, params.surrogate_width);
  }
  r.h = lif_leak(r.u, r.s, params.v_reset, params.beta);
  return r;
}

void lif_run(std::span<const real> x, std::span<real> u, std::span<real> s, std::size_t neurons,
             const LIFParams& params) {
  if (neurons == 0) return;
  if (x.size() != u.size() || x.size() != s.size() || x.size() % neurons != 0) {
    throw ShapeError("lif_run: buffer sizes disagree");
  }
  const std::size_t steps = x.size() / neurons;
  std::vector<real> h(neurons, real(0));
  const bool relaxed = params.fire == FireMode::relaxed;
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t base = t * neurons;
    for (std::size_t i = 0; i < neurons; ++i) {
      const real ui = h[i] + x[base + i];
      const real si = relaxed ? relaxed_spike(ui, params.v_th, params.surrogate_width) : heaviside(ui, params.v_th);
      u[base + i] = ui;
      s[base + i] = si;
      h[i] = params.v_reset * si + (params.beta * ui) * (real(1) - si);
    }
  }
}

void lif_run_backward(std::span<const real> grad_s, std::span<const real> u, std::span<const real> s,
                      std::span<real> grad_x, std::size_t neurons, const LIFParams& params) {
  if (neurons == 0) return;
  if (grad_s.size() != u.size() || u.size() != s.size() || grad_x.size() != u.size()) {
    throw ShapeError("lif_run_backward: buffer sizes disagree");
  }
  const std::size_t steps = u.size() / neurons;
  // grad_h carries dL/dH^t back from timestep t+1.
  std::vector<real> grad_h(neurons, real(0));
  for (std::size_t t = steps; t-- > 0;) {
    const std::size_t base = t * neurons;
    for (std::size_t i = 0; i < neurons; ++i) {
      const real ui = u[base + i];
      const real si = s[base + i];
      const real ds = rect_surrogate(ui, params.v_th, params.surrogate_width);
      const real dh_du = params.v_reset * ds + params.beta * (real(1) - si) - params.beta * ui * ds;
      const real gu = grad_s[base + i] * ds + grad_h[i] * dh_du;
      grad_x[base + i] = gu;
      grad_h[i] = gu;
    }
  }
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
