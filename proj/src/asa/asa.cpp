#include "spikeforge/asa/asa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spikeforge::inline SPIKEFORGE_ABI {
namespace {

constexpr ConvOptions kSaConv{1, 1};

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (real& v : t.values()) v = static_cast<real>(dist(rng));
  return t;
}

// Indices of the k largest entries of `values`, lower index first on ties.
template <typename Get>
std::vector<std::size_t> top_k(std::size_t n, std::size_t k, Get get) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return get(a) > get(b); });
  idx.resize(std::min(k, n));
  return idx;
}

Tensor broadcast_mask(const Tensor& x, const Tensor& mask) {
  const std::size_t fibers = x.dim(0) * x.dim(1);
  const std::size_t plane = x.dim(2) * x.dim(3);
  Tensor out(x.shape());
  for (std::size_t f = 0; f < fibers; ++f) {
    const real m = mask[f];
    const real* src = x.data() + f * plane;
    real* dst = out.data() + f * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * m;
  }
  return out;
}

void require_tc_map(const Tensor& t, const char* what) {
  if (t.rank() != 4 || t.dim(2) != 1 || t.dim(3) != 1) {
    throw ShapeError(std::string(what) + ": expected (T,C,1,1), got " + shape_string(t.shape()));
  }
}

}  // namespace

void AsaParams::zero_grad() {
  for (GradPair* p : {&alpha, &gamma, &w1, &w2, &sa1_w, &sa1_b, &sa2_w, &sa2_b}) p->zero_grad();
}

AsaParams make_asa_params(AsaVariant variant, std::size_t timesteps, std::size_t channels, std::size_t reduction,
                          std::mt19937_64& rng, std::optional<std::size_t> k) {
  if (timesteps == 0 || channels == 0) throw std::invalid_argument("asa: timesteps and channels must be positive");
  if (variant == AsaVariant::asa1 && (reduction == 0 || timesteps % reduction != 0)) {
    throw std::invalid_argument("asa: reduction factor " + std::to_string(reduction) +
                                " must divide timesteps " + std::to_string(timesteps));
  }
  AsaParams p;
  p.variant = variant;
  p.timesteps = timesteps;
  p.channels = channels;
  p.reduction = reduction;
  p.k = k.value_or(std::max<std::size_t>(1, channels / 2));
  if (p.k == 0 || p.k > channels) throw std::invalid_argument("asa: k must lie in [1, C]");
  p.alpha = GradPair(Tensor(Shape{1}, real(0.5)));
  p.gamma = GradPair(Tensor(Shape{1}, real(0.5)));
  if (variant == AsaVariant::asa1) {
    const std::size_t hidden = timesteps / reduction;
    p.w1 = GradPair(kaiming_uniform(Shape{hidden, timesteps}, timesteps, rng));
    p.w2 = GradPair(kaiming_uniform(Shape{timesteps, hidden}, hidden, rng));
  }
  p.sa1_w = GradPair(kaiming_uniform(Shape{1, 2, 3, 3}, 18, rng));
  p.sa1_b = GradPair(Tensor(Shape{1}));
  p.sa2_w = GradPair(kaiming_uniform(Shape{1, 2, 3, 3}, 18, rng));
  p.sa2_b = GradPair(Tensor(Shape{1}));
  return p;
}

TcStats tc_stats(const Tensor& x) {
  require_rank(x, 4, "tc_stats");
  PoolResult avg = pool_spatial(x, PoolKind::avg);
  PoolResult max = pool_spatial(x, PoolKind::max);
  return TcStats{std::move(avg.out), std::move(max.out), std::move(max.argmax)};
}

Tensor combine_stats(const Tensor& f_avg, const Tensor& f_max, real alpha, real gamma) {
  require_tc_map(f_avg, "importance");
  require_shape(f_max, f_avg.shape(), "importance F_max");
  Tensor m(f_avg.shape());
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = real(0.5) * (f_avg[i] + f_max[i]) + alpha * f_avg[i] + gamma * f_max[i];
  }
  return m;
}

Tensor importance_asa2(const Tensor& f_avg, const Tensor& f_max, real alpha, real gamma) {
  return combine_stats(f_avg, f_max, alpha, gamma);
}

Tensor importance_asa1(const Tensor& f_avg, const Tensor& f_max, const AsaParams& params, ImportanceCache* cache) {
  Tensor m_prime = combine_stats(f_avg, f_max, params.alpha.value[0], params.gamma.value[0]);
  const std::size_t t_len = m_prime.dim(0), channels = m_prime.dim(1);
  require_rank(params.w1.value, 2, "asa W1");
  const std::size_t hidden = params.w1.value.dim(0);
  require_shape(params.w1.value, Shape{hidden, t_len}, "asa W1");
  require_shape(params.w2.value, Shape{t_len, hidden}, "asa W2");

  Tensor pre(Shape{channels, hidden});
  Tensor act(Shape{channels, hidden});
  Tensor m(m_prime.shape());
  const Tensor& w1 = params.w1.value;
  const Tensor& w2 = params.w2.value;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t j = 0; j < hidden; ++j) {
      real acc = 0;
      for (std::size_t t = 0; t < t_len; ++t) acc += w1[j * t_len + t] * m_prime[t * channels + c];
      pre[c * hidden + j] = acc;
      act[c * hidden + j] = acc > real(0) ? acc : real(0);
    }
    for (std::size_t t = 0; t < t_len; ++t) {
      real acc = 0;
      for (std::size_t j = 0; j < hidden; ++j) acc += w2[t * hidden + j] * act[c * hidden + j];
      m[t * channels + c] = sigmoid(acc);
    }
  }
  if (cache) {
    cache->m_prime = std::move(m_prime);
    cache->hidden_pre = std::move(pre);
    cache->hidden = std::move(act);
    cache->m = m;
  }
  return m;
}

MaskPair separate_channels(const Tensor& importance, std::size_t k) {
  require_tc_map(importance, "separate_channels");
  if (k == 0) throw std::invalid_argument("separate_channels: k must be >= 1");
  const std::size_t t_len = importance.dim(0), channels = importance.dim(1);
  std::vector<unsigned char> mask_c(t_len * channels, 0), mask_t(t_len * channels, 0);
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t c : top_k(channels, k, [&](std::size_t i) { return importance[t * channels + i]; })) {
      mask_c[t * channels + c] = 1;
    }
  }
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t : top_k(t_len, k, [&](std::size_t i) { return importance[i * channels + c]; })) {
      mask_t[t * channels + c] = 1;
    }
  }
  MaskPair masks{Tensor(importance.shape()), Tensor(importance.shape())};
  for (std::size_t i = 0; i < mask_c.size(); ++i) {
    const bool exactly_one = (mask_c[i] + mask_t[i]) == 1;
    masks.m1[i] = exactly_one ? real(1) : real(0);
    masks.m2[i] = real(1) - masks.m1[i];
  }
  return masks;
}

Tensor spatial_attention(const Tensor& y, const Tensor& conv_w, const Tensor& conv_b, SpatialAttentionCache* cache) {
  require_rank(y, 4, "spatial_attention");
  require_shape(conv_w, Shape{1, 2, 3, 3}, "spatial_attention kernel");
  require_shape(conv_b, Shape{1}, "spatial_attention bias");
  const std::size_t h = y.dim(2), w = y.dim(3), plane = h * w;
  PoolResult mx = pool_tc(y, PoolKind::max);
  PoolResult av = pool_tc(y, PoolKind::avg);
  Tensor stacked(Shape{2, h, w});
  std::copy(mx.out.values().begin(), mx.out.values().end(), stacked.data());
  std::copy(av.out.values().begin(), av.out.values().end(), stacked.data() + plane);
  Tensor scores = conv2d(stacked, conv_w, conv_b, kSaConv);
  for (real& v : scores.values()) v = sigmoid(v);

  Tensor out(y.shape());
  const std::size_t fibers = y.dim(0) * y.dim(1);
  for (std::size_t f = 0; f < fibers; ++f) {
    for (std::size_t i = 0; i < plane; ++i) out[f * plane + i] = y[f * plane + i] * scores[i];
  }
  if (cache) {
    cache->max_pool = std::move(mx);
    cache->avg_pool = std::move(av);
    cache->stacked = std::move(stacked);
    cache->scores = std::move(scores);
  }
  return out;
}

SpatialAttentionGrads spatial_attention_backward(const Tensor& grad_out, const Tensor& y, const Tensor& conv_w,
                                                 const SpatialAttentionCache& cache) {
  require_shape(grad_out, y.shape(), "spatial_attention_backward");
  const std::size_t h = y.dim(2), w = y.dim(3), plane = h * w;
  const std::size_t fibers = y.dim(0) * y.dim(1);
  SpatialAttentionGrads g;
  g.grad_y = Tensor(y.shape());
  Tensor grad_logit(Shape{1, h, w});
  for (std::size_t i = 0; i < plane; ++i) {
    double acc = 0;
    const real s = cache.scores[i];
    for (std::size_t f = 0; f < fibers; ++f) {
      acc += static_cast<double>(grad_out[f * plane + i]) * y[f * plane + i];
      g.grad_y[f * plane + i] = grad_out[f * plane + i] * s;
    }
    grad_logit[i] = static_cast<real>(acc) * s * (real(1) - s);
  }
  ConvGrads cg = conv2d_backward(grad_logit, cache.stacked, conv_w, kSaConv);
  g.grad_w = std::move(cg.grad_w);
  g.grad_b = std::move(cg.grad_bias);

  Tensor grad_max(Shape{1, 1, h, w}), grad_avg(Shape{1, 1, h, w});
  std::copy(cg.grad_x.data(), cg.grad_x.data() + plane, grad_max.data());
  std::copy(cg.grad_x.data() + plane, cg.grad_x.data() + 2 * plane, grad_avg.data());
  add_inplace(g.grad_y, pool_tc_backward(grad_max, cache.max_pool, PoolKind::max));
  add_inplace(g.grad_y, pool_tc_backward(grad_avg, cache.avg_pool, PoolKind::avg));
  return g;
}

AsaOutput asa_forward(const Tensor& x, const AsaParams& params) {
  require_rank(x, 4, "asa_forward");
  if (x.dim(0) != params.timesteps || x.dim(1) != params.channels) {
    throw ShapeError("asa_forward: parameters built for T=" + std::to_string(params.timesteps) +
                     ", C=" + std::to_string(params.channels) + ", input is " + shape_string(x.shape()));
  }
  AsaOutput res;
  AsaCache& c = res.cache;
  c.stats = tc_stats(x);
  if (params.variant == AsaVariant::asa1) {
    importance_asa1(c.stats.avg, c.stats.max, params, &c.importance);
  } else {
    c.importance.m_prime = importance_asa2(c.stats.avg, c.stats.max, params.alpha.value[0], params.gamma.value[0]);
    c.importance.m = c.importance.m_prime;
  }
  c.masks = separate_channels(c.importance.m, params.k);
  c.y1 = broadcast_mask(x, c.masks.m1);
  c.y2 = broadcast_mask(x, c.masks.m2);
  res.out = spatial_attention(c.y1, params.sa1_w.value, params.sa1_b.value, &c.sa1);
  add_inplace(res.out, spatial_attention(c.y2, params.sa2_w.value, params.sa2_b.value, &c.sa2));
  return res;
}

Tensor asa_backward(const Tensor& grad_out, const AsaCache& cache, AsaParams& params) {
  require_shape(grad_out, cache.y1.shape(), "asa_backward");
  SpatialAttentionGrads g1 = spatial_attention_backward(grad_out, cache.y1, params.sa1_w.value, cache.sa1);
  SpatialAttentionGrads g2 = spatial_attention_backward(grad_out, cache.y2, params.sa2_w.value, cache.sa2);
  add_inplace(params.sa1_w.grad, g1.grad_w);
  add_inplace(params.sa1_b.grad, g1.grad_b);
  add_inplace(params.sa2_w.grad, g2.grad_w);
  add_inplace(params.sa2_b.grad, g2.grad_b);
  Tensor grad_x = broadcast_mask(g1.grad_y, cache.masks.m1);
  add_inplace(grad_x, broadcast_mask(g2.grad_y, cache.masks.m2));
  return grad_x;
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
