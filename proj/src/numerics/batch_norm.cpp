#include <cmath>

#include "spikeforge/numerics/ops.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

BatchNormResult batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, NormMode mode,
                           RunningStats& stats, real eps) {
  require_rank(x, 4, "batch_norm input");
  const std::size_t batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  require_shape(gamma, Shape{channels}, "batch_norm gamma");
  require_shape(beta, Shape{channels}, "batch_norm beta");
  require_shape(stats.mean, Shape{channels}, "batch_norm running mean");
  require_shape(stats.var, Shape{channels}, "batch_norm running var");
  const std::size_t count = batch * plane;
  if (mode == NormMode::train && count < 2) {
    throw ShapeError("batch_norm: train mode needs at least two values per channel, got " +
                     std::to_string(count));
  }

  BatchNormResult res;
  res.y = Tensor(x.shape());
  res.cache.mode = mode;
  res.cache.x_hat = Tensor(x.shape());
  res.cache.inv_std.assign(channels, real(0));

  for (std::size_t c = 0; c < channels; ++c) {
    double mean = 0, var = 0;
    if (mode == NormMode::train) {
      for (std::size_t b = 0; b < batch; ++b) {
        const real* p = x.data() + (b * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) mean += p[i];
      }
      mean /= static_cast<double>(count);
      for (std::size_t b = 0; b < batch; ++b) {
        const real* p = x.data() + (b * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - mean;
          var += d * d;
        }
      }
      var /= static_cast<double>(count);
      const double m = stats.momentum;
      stats.mean[c] = static_cast<real>((1.0 - m) * stats.mean[c] + m * mean);
      stats.var[c] = static_cast<real>((1.0 - m) * stats.var[c] + m * var);
    } else {
      mean = stats.mean[c];
      var = stats.var[c];
    }
    const real inv_std = static_cast<real>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    const real mu = static_cast<real>(mean);
    res.cache.inv_std[c] = inv_std;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * plane;
      const real* p = x.data() + off;
      real* xh = res.cache.x_hat.data() + off;
      real* y = res.y.data() + off;
      for (std::size_t i = 0; i < plane; ++i) {
        xh[i] = (p[i] - mu) * inv_std;
        y[i] = gamma[c] * xh[i] + beta[c];
      }
    }
  }
  return res;
}

BatchNormGrads batch_norm_backward(const Tensor& grad_y, const BatchNormCache& cache, const Tensor& gamma) {
  require_shape(grad_y, cache.x_hat.shape(), "batch_norm_backward grad");
  const std::size_t batch = grad_y.dim(0), channels = grad_y.dim(1), plane = grad_y.dim(2) * grad_y.dim(3);
  require_shape(gamma, Shape{channels}, "batch_norm_backward gamma");
  const double count = static_cast<double>(batch * plane);

  BatchNormGrads g;
  g.grad_x = Tensor(grad_y.shape());
  g.grad_gamma = Tensor(Shape{channels});
  g.grad_beta = Tensor(Shape{channels});

  for (std::size_t c = 0; c < channels; ++c) {
    double sum_g = 0, sum_gx = 0;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_g += grad_y[off + i];
        sum_gx += static_cast<double>(grad_y[off + i]) * cache.x_hat[off + i];
      }
    }
    g.grad_beta[c] = static_cast<real>(sum_g);
    g.grad_gamma[c] = static_cast<real>(sum_gx);
    const double scale = static_cast<double>(gamma[c]) * cache.inv_std[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        if (cache.mode == NormMode::train) {
          const double v = count * grad_y[off + i] - sum_g - cache.x_hat[off + i] * sum_gx;
          g.grad_x[off + i] = static_cast<real>(scale * v / count);
        } else {
          g.grad_x[off + i] = static_cast<real>(scale * grad_y[off + i]);
        }
      }
    }
  }
  return g;
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
