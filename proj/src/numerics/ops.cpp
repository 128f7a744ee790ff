#include <cmath>
#include <limits>

#include "spikeforge/numerics/ops.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {
namespace {

Tensor linear_impl(const Tensor& x, const Tensor& w, const Tensor* bias) {
  require_rank(w, 2, "linear weight");
  if (x.rank() == 0) throw ShapeError("linear: input has no trailing dimension");
  const std::size_t d_in = x.shape().back();
  const std::size_t d_out = w.dim(0);
  if (w.dim(1) != d_in) {
    throw ShapeError("linear: weight " + shape_string(w.shape()) + " does not match input " +
                     shape_string(x.shape()));
  }
  if (bias) require_shape(*bias, Shape{d_out}, "linear bias");
  Shape out_shape = x.shape();
  out_shape.back() = d_out;
  Tensor out(out_shape);
  const std::size_t rows = x.size() / d_in;
  for (std::size_t r = 0; r < rows; ++r) {
    const real* xr = x.data() + r * d_in;
    for (std::size_t o = 0; o < d_out; ++o) {
      const real* wr = w.data() + o * d_in;
      real acc = bias ? (*bias)[o] : real(0);
      for (std::size_t i = 0; i < d_in; ++i) acc += wr[i] * xr[i];
      out[r * d_out + o] = acc;
    }
  }
  return out;
}

void require_spatial(const Tensor& x, const char* what) {
  if (x.rank() < 2) throw ShapeError(std::string(what) + ": need at least two trailing spatial axes");
  if (x.shape()[x.rank() - 1] == 0 || x.shape()[x.rank() - 2] == 0) {
    throw ShapeError(std::string(what) + ": empty spatial dimensions");
  }
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& w) { return linear_impl(x, w, nullptr); }
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) { return linear_impl(x, w, &bias); }

LinearGrads linear_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w) {
  require_rank(w, 2, "linear weight");
  const std::size_t d_in = w.dim(1), d_out = w.dim(0);
  if (x.rank() == 0 || x.shape().back() != d_in) throw ShapeError("linear_backward: input mismatch");
  Shape expected = x.shape();
  expected.back() = d_out;
  require_shape(grad_out, expected, "linear_backward grad_out");
  LinearGrads g{Tensor(x.shape()), Tensor(w.shape()), Tensor(Shape{d_out})};
  const std::size_t rows = x.size() / d_in;
  for (std::size_t r = 0; r < rows; ++r) {
    const real* xr = x.data() + r * d_in;
    const real* gr = grad_out.data() + r * d_out;
    real* gx = g.grad_x.data() + r * d_in;
    for (std::size_t o = 0; o < d_out; ++o) {
      const real go = gr[o];
      if (go == real(0)) continue;
      const real* wr = w.data() + o * d_in;
      real* gw = g.grad_w.data() + o * d_in;
      for (std::size_t i = 0; i < d_in; ++i) {
        gx[i] += go * wr[i];
        gw[i] += go * xr[i];
      }
      g.grad_bias[o] += go;
    }
  }
  return g;
}

PoolResult pool_spatial(const Tensor& x, PoolKind kind) {
  require_spatial(x, "pool_spatial");
  const std::size_t plane = x.shape()[x.rank() - 1] * x.shape()[x.rank() - 2];
  const std::size_t maps = x.size() / plane;
  Shape out_shape = x.shape();
  out_shape[out_shape.size() - 1] = 1;
  out_shape[out_shape.size() - 2] = 1;
  PoolResult res{Tensor(out_shape), x.shape(), {}};
  if (kind == PoolKind::max) res.argmax.resize(maps);
  for (std::size_t m = 0; m < maps; ++m) {
    const real* p = x.data() + m * plane;
    if (kind == PoolKind::avg) {
      double acc = 0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      res.out[m] = static_cast<real>(acc / static_cast<double>(plane));
    } else {
      std::size_t best = 0;
      for (std::size_t i = 1; i < plane; ++i) {
        if (p[i] > p[best]) best = i;
      }
      res.out[m] = p[best];
      res.argmax[m] = m * plane + best;
    }
  }
  return res;
}

Tensor pool_spatial_backward(const Tensor& grad_out, const PoolResult& fwd, PoolKind kind) {
  require_shape(grad_out, fwd.out.shape(), "pool_spatial_backward");
  Tensor gx(fwd.input_shape);
  const std::size_t maps = grad_out.size();
  const std::size_t plane = maps == 0 ? 0 : gx.size() / maps;
  for (std::size_t m = 0; m < maps; ++m) {
    if (kind == PoolKind::max) {
      gx[fwd.argmax[m]] += grad_out[m];
    } else {
      const real share = grad_out[m] / static_cast<real>(plane);
      for (std::size_t i = 0; i < plane; ++i) gx[m * plane + i] += share;
    }
  }
  return gx;
}

PoolResult pool_tc(const Tensor& x, PoolKind kind) {
  require_rank(x, 4, "pool_tc");
  require_spatial(x, "pool_tc");
  const std::size_t fibers = x.dim(0) * x.dim(1);
  const std::size_t plane = x.dim(2) * x.dim(3);
  if (fibers == 0) throw ShapeError("pool_tc: empty temporal-channel axes");
  PoolResult res{Tensor(Shape{1, 1, x.dim(2), x.dim(3)}), x.shape(), {}};
  if (kind == PoolKind::max) res.argmax.assign(plane, 0);
  for (std::size_t i = 0; i < plane; ++i) {
    if (kind == PoolKind::avg) {
      double acc = 0;
      for (std::size_t f = 0; f < fibers; ++f) acc += x[f * plane + i];
      res.out[i] = static_cast<real>(acc / static_cast<double>(fibers));
    } else {
      std::size_t best = i;
      for (std::size_t f = 1; f < fibers; ++f) {
        if (x[f * plane + i] > x[best]) best = f * plane + i;
      }
      res.out[i] = x[best];
      res.argmax[i] = best;
    }
  }
  return res;
}

Tensor pool_tc_backward(const Tensor& grad_out, const PoolResult& fwd, PoolKind kind) {
  require_shape(grad_out, fwd.out.shape(), "pool_tc_backward");
  Tensor gx(fwd.input_shape);
  const std::size_t plane = grad_out.size();
  const std::size_t fibers = plane == 0 ? 0 : gx.size() / plane;
  for (std::size_t i = 0; i < plane; ++i) {
    if (kind == PoolKind::max) {
      gx[fwd.argmax[i]] += grad_out[i];
    } else {
      const real share = grad_out[i] / static_cast<real>(fibers);
      for (std::size_t f = 0; f < fibers; ++f) gx[f * plane + i] += share;
    }
  }
  return gx;
}

PoolResult pool2d(const Tensor& x, std::size_t window, PoolKind kind) {
  require_spatial(x, "pool2d");
  if (window == 0) throw ShapeError("pool2d: window must be >= 1");
  const std::size_t h = x.shape()[x.rank() - 2], w = x.shape()[x.rank() - 1];
  const std::size_t ho = h / window, wo = w / window;
  if (ho == 0 || wo == 0) throw ShapeError("pool2d: window larger than input");
  const std::size_t maps = x.size() / (h * w);
  Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] = ho;
  out_shape[out_shape.size() - 1] = wo;
  PoolResult res{Tensor(out_shape), x.shape(), {}};
  if (kind == PoolKind::max) res.argmax.resize(res.out.size());
  const real inv_area = real(1) / static_cast<real>(window * window);
  for (std::size_t m = 0; m < maps; ++m) {
    const real* p = x.data() + m * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const std::size_t o = (m * ho + oy) * wo + ox;
        if (kind == PoolKind::avg) {
          real acc = 0;
          for (std::size_t dy = 0; dy < window; ++dy)
            for (std::size_t dx = 0; dx < window; ++dx) acc += p[(oy * window + dy) * w + ox * window + dx];
          res.out[o] = acc * inv_area;
        } else {
          std::size_t best = oy * window * w + ox * window;
          for (std::size_t dy = 0; dy < window; ++dy) {
            for (std::size_t dx = 0; dx < window; ++dx) {
              const std::size_t i = (oy * window + dy) * w + ox * window + dx;
              if (p[i] > p[best]) best = i;
            }
          }
          res.out[o] = p[best];
          res.argmax[o] = m * h * w + best;
        }
      }
    }
  }
  return res;
}

Tensor pool2d_backward(const Tensor& grad_out, const PoolResult& fwd, PoolKind kind) {
  require_shape(grad_out, fwd.out.shape(), "pool2d_backward");
  Tensor gx(fwd.input_shape);
  const std::size_t rank = fwd.input_shape.size();
  const std::size_t h = fwd.input_shape[rank - 2], w = fwd.input_shape[rank - 1];
  const std::size_t ho = grad_out.shape()[rank - 2], wo = grad_out.shape()[rank - 1];
  const std::size_t window = h / ho;
  const std::size_t maps = grad_out.size() / (ho * wo);
  const real inv_area = real(1) / static_cast<real>(window * window);
  for (std::size_t m = 0; m < maps; ++m) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const std::size_t o = (m * ho + oy) * wo + ox;
        if (kind == PoolKind::max) {
          gx[fwd.argmax[o]] += grad_out[o];
        } else {
          for (std::size_t dy = 0; dy < window; ++dy)
            for (std::size_t dx = 0; dx < window; ++dx)
              gx[m * h * w + (oy * window + dy) * w + ox * window + dx] += grad_out[o] * inv_area;
        }
      }
    }
  }
  return gx;
}

SpikeResult surrogate_heaviside(const Tensor& u, real v_th, real width) {
  if (!(width > real(0))) throw std::invalid_argument("surrogate width must be positive");
  SpikeResult r{Tensor(u.shape()), Tensor(u.shape())};
  for (std::size_t i = 0; i < u.size(); ++i) {
    r.spike[i] = heaviside(u[i], v_th);
    r.pseudo_grad[i] = rect_surrogate(u[i], v_th, width);
  }
  return r;
}

real sigmoid(real x) {
  if (x >= real(0)) return real(1) / (real(1) + std::exp(-x));
  const real e = std::exp(x);
  return e / (real(1) + e);
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > real(0) ? x[i] : real(0);
  return out;
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
