#include "spikeforge/snn_core/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "spikeforge/numerics/parallel.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {
namespace {

std::mt19937_64 stream_for(std::uint64_t seed, const std::string& name) {
  return std::mt19937_64(splitmix64(seed ^ fnv1a(name.data(), name.size())));
}

Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (real& v : t.values()) v = static_cast<real>(dist(rng));
  return t;
}

Tensor copy_block(const Tensor& src, std::size_t index, Shape shape) {
  const std::size_t n = shape_size(shape);
  std::vector<real> values(src.data() + index * n, src.data() + (index + 1) * n);
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace

std::vector<LayerGeometry> plan_layers(const NetworkConfig& cfg) {
  if (cfg.timesteps == 0) throw ConfigError("timesteps must be >= 1", 0);
  if (cfg.layers.empty()) throw ConfigError("network needs at least one conv layer", 0);
  std::vector<LayerGeometry> out;
  std::size_t c = cfg.in_channels, h = cfg.in_height, w = cfg.in_width;
  for (std::size_t n = 0; n < cfg.layers.size(); ++n) {
    const ConvLayerSpec& spec = cfg.layers[n];
    LayerGeometry g;
    g.spec = spec;
    g.in_c = c;
    g.in_h = h;
    g.in_w = w;
    g.out_c = spec.out_channels;
    try {
      g.out_h = conv_output_size(h, spec.kernel, spec.stride, spec.pad);
      g.out_w = conv_output_size(w, spec.kernel, spec.stride, spec.pad);
    } catch (const ShapeError& e) {
      throw ConfigError("layer " + std::to_string(n) + ": " + e.what(), 0);
    }
    if (spec.pool_window == 0 || g.out_h < spec.pool_window || g.out_w < spec.pool_window) {
      throw ConfigError("layer " + std::to_string(n) + ": pool window does not fit the conv output", 0);
    }
    g.pooled_h = g.out_h / spec.pool_window;
    g.pooled_w = g.out_w / spec.pool_window;
    if (cfg.asa_enabled) {
      if (cfg.asa_variant == AsaVariant::asa1 &&
          (cfg.asa_reduction == 0 || cfg.timesteps % cfg.asa_reduction != 0)) {
        throw ConfigError("asa_reduction " + std::to_string(cfg.asa_reduction) + " must divide timesteps " +
                              std::to_string(cfg.timesteps),
                          0);
      }
      if (cfg.asa_k > g.out_c) throw ConfigError("asa_k exceeds the channel count of layer " + std::to_string(n), 0);
    }
    out.push_back(g);
    c = g.out_c;
    h = g.pooled_h;
    w = g.pooled_w;
  }
  try {
    cfg.lif.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), 0);
  }
  return out;
}

void NetworkParams::zero_grad() {
  for_each_trainable([](const std::string&, GradPair& p) { p.zero_grad(); });
}

NetworkParams init_network(const NetworkConfig& cfg, std::uint64_t seed) {
  const std::vector<LayerGeometry> geo = plan_layers(cfg);
  NetworkParams params;
  for (std::size_t n = 0; n < geo.size(); ++n) {
    const LayerGeometry& g = geo[n];
    const std::string prefix = "layer" + std::to_string(n) + ".";
    LayerParams l;
    const std::size_t fan_in = g.in_c * g.spec.kernel * g.spec.kernel;
    auto rng = stream_for(seed, prefix + "conv_w");
    l.conv_w = GradPair(uniform_tensor(Shape{g.out_c, g.in_c, g.spec.kernel, g.spec.kernel},
                                       std::sqrt(6.0 / static_cast<double>(fan_in)), rng));
    l.bn_gamma = GradPair(Tensor(Shape{g.out_c}, real(1)));
    l.bn_beta = GradPair(Tensor(Shape{g.out_c}, real(0)));
    l.bn_stats = RunningStats(g.out_c, cfg.bn_momentum);
    if (cfg.asa_enabled) {
      auto asa_rng = stream_for(seed, prefix + "asa");
      std::optional<std::size_t> k;
      if (cfg.asa_k) k = cfg.asa_k;
      l.asa = make_asa_params(cfg.asa_variant, cfg.timesteps, g.out_c, cfg.asa_reduction, asa_rng, k);
    }
    params.layers.push_back(std::move(l));
  }
  const std::size_t features = geo.back().pooled_size();
  auto rng = stream_for(seed, "readout.w");
  params.readout_w =
      GradPair(uniform_tensor(Shape{cfg.num_classes, features}, 1.0 / std::sqrt(static_cast<double>(features)), rng));
  params.readout_b = GradPair(Tensor(Shape{cfg.num_classes}));
  return params;
}

std::uint64_t shared_init_hash(NetworkParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](const std::string& name, const Tensor& t) {
    h = fnv1a(name.data(), name.size(), h);
    h = fnv1a(t.data(), t.size() * sizeof(real), h);
  };
  params.for_each_trainable([&](const std::string& name, GradPair& p) {
    if (name.find(".asa.") == std::string::npos) mix(name, p.value);
  });
  params.for_each_buffer([&](const std::string& name, Tensor& t) { mix(name, t); });
  return h;
}

BatchNormResult conv_block(const Tensor& s_prev, const Tensor& w, const Tensor& gamma, const Tensor& beta,
                           RunningStats& stats, NormMode mode, ConvOptions opts, real eps, bool binary_input) {
#ifndef NDEBUG
  if (binary_input) {
    for (real v : s_prev.values()) {
      if (v != real(0) && v != real(1)) throw std::invalid_argument("conv_block: spike input must be binary");
    }
  }
#else
  (void)binary_input;
#endif
  const Tensor conv = conv2d(s_prev, w, opts);
  return batch_norm(conv, gamma, beta, mode, stats, eps);
}

Network::Network(NetworkConfig cfg) : cfg_(std::move(cfg)), geometry_(plan_layers(cfg_)) {}

std::size_t Network::feature_size() const { return geometry_.back().pooled_size(); }

BatchTrace Network::forward(NetworkParams& params, const Tensor& frames, NormMode mode) const {
  const std::size_t T = cfg_.timesteps;
  if (frames.rank() != 5 || frames.dim(1) != T || frames.dim(2) != cfg_.in_channels ||
      frames.dim(3) != cfg_.in_height || frames.dim(4) != cfg_.in_width) {
    throw ShapeError("network forward: expected (B," + std::to_string(T) + "," + std::to_string(cfg_.in_channels) +
                     "," + std::to_string(cfg_.in_height) + "," + std::to_string(cfg_.in_width) + "), got " +
                     shape_string(frames.shape()));
  }
  if (params.layers.size() != geometry_.size()) throw ShapeError("network forward: parameter/layer mismatch");
  const std::size_t B = frames.dim(0);
  BatchTrace trace;
  trace.batch = B;
  trace.mode = mode;
  Tensor input = frames.reshaped(Shape{B * T, cfg_.in_channels, cfg_.in_height, cfg_.in_width});
  const bool binary_spikes = cfg_.lif.fire == FireMode::heaviside;

  for (std::size_t n = 0; n < geometry_.size(); ++n) {
    const LayerGeometry& g = geometry_[n];
    LayerParams& lp = params.layers[n];
    LayerTrace lt;
    lt.input = std::move(input);
    const bool binary_input = n > 0 && binary_spikes && geometry_[n - 1].spec.pool == PoolKind::max;
    BatchNormResult bn = conv_block(lt.input, lp.conv_w.value, lp.bn_gamma.value, lp.bn_beta.value, lp.bn_stats,
                                    mode, ConvOptions{g.spec.stride, g.spec.pad}, cfg_.bn_eps, binary_input);
    lt.bn = std::move(bn.cache);
    lt.current = std::move(bn.y);

    const Shape sample_shape{T, g.out_c, g.out_h, g.out_w};
    const std::size_t sample_size = shape_size(sample_shape);
    if (lp.asa) {
      lt.asa.resize(B);
      parallel_for(B, [&](std::size_t b) {
        const Tensor xs = copy_block(lt.current, b, sample_shape);
        AsaOutput out = asa_forward(xs, *lp.asa);
        std::copy(out.out.values().begin(), out.out.values().end(), lt.current.data() + b * sample_size);
        lt.asa[b] = std::move(out.cache);
      });
    }

    lt.u = Tensor(lt.current.shape());
    lt.s = Tensor(lt.current.shape());
    parallel_for(B, [&](std::size_t b) {
      lif_run(lt.current.values().subspan(b * sample_size, sample_size), lt.u.values().subspan(b * sample_size, sample_size),
              lt.s.values().subspan(b * sample_size, sample_size), g.neurons(), cfg_.lif);
    });

    lt.pooled = pool2d(lt.s, g.spec.pool_window, g.spec.pool);
    input = lt.pooled.out;
    trace.layers.push_back(std::move(lt));
  }

  const std::size_t D = feature_size();
  trace.features = Tensor(Shape{B, D});
  const Tensor& last = trace.layers.back().pooled.out;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t d = 0; d < D; ++d) {
      real acc = 0;
      for (std::size_t t = 0; t < T; ++t) acc += last[(b * T + t) * D + d];
      trace.features[b * D + d] = acc / static_cast<real>(T);
    }
  }
  trace.logits = linear(trace.features, params.readout_w.value, params.readout_b.value);
  return trace;
}

void Network::bptt(NetworkParams& params, const BatchTrace& trace, const Tensor& grad_logits) const {
  const std::size_t T = cfg_.timesteps;
  const std::size_t B = trace.batch;
  if (trace.layers.size() != geometry_.size() || trace.features.empty()) {
    throw std::invalid_argument("bptt: incomplete forward trace");
  }
  require_shape(grad_logits, trace.logits.shape(), "bptt grad_logits");

  LinearGrads lg = linear_backward(grad_logits, trace.features, params.readout_w.value);
  add_inplace(params.readout_w.grad, lg.grad_w);
  add_inplace(params.readout_b.grad, lg.grad_bias);

  const std::size_t D = feature_size();
  Tensor grad_pooled(trace.layers.back().pooled.out.shape());
  const real inv_t = real(1) / static_cast<real>(T);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t d = 0; d < D; ++d) grad_pooled[(b * T + t) * D + d] = lg.grad_x[b * D + d] * inv_t;
    }
  }

  for (std::size_t n = geometry_.size(); n-- > 0;) {
    const LayerGeometry& g = geometry_[n];
    const LayerTrace& lt = trace.layers[n];
    LayerParams& lp = params.layers[n];
    if (lt.u.empty() || lt.s.empty() || lt.input.empty()) throw std::invalid_argument("bptt: missing record entries");

    const Tensor grad_s = pool2d_backward(grad_pooled, lt.pooled, g.spec.pool);
    Tensor grad_x(lt.current.shape());
    const std::size_t sample_size = T * g.neurons();
    parallel_for(B, [&](std::size_t b) {
      lif_run_backward(grad_s.values().subspan(b * sample_size, sample_size),
                       lt.u.values().subspan(b * sample_size, sample_size),
                       lt.s.values().subspan(b * sample_size, sample_size),
                       grad_x.values().subspan(b * sample_size, sample_size), g.neurons(), cfg_.lif);
    });

    if (lp.asa) {
      if (lt.asa.size() != B) throw std::invalid_argument("bptt: missing ASA caches");
      const Shape sample_shape{T, g.out_c, g.out_h, g.out_w};
      for (std::size_t b = 0; b < B; ++b) {
        const Tensor gs = copy_block(grad_x, b, sample_shape);
        const Tensor gxs = asa_backward(gs, lt.asa[b], *lp.asa);
        std::copy(gxs.values().begin(), gxs.values().end(), grad_x.data() + b * sample_size);
      }
    }

    BatchNormGrads bg = batch_norm_backward(grad_x, lt.bn, lp.bn_gamma.value);
    add_inplace(lp.bn_gamma.grad, bg.grad_gamma);
    add_inplace(lp.bn_beta.grad, bg.grad_beta);
    ConvGrads cg = conv2d_backward(bg.grad_x, lt.input, lp.conv_w.value, ConvOptions{g.spec.stride, g.spec.pad}, n > 0);
    add_inplace(lp.conv_w.grad, cg.grad_w);
    if (n > 0) grad_pooled = std::move(cg.grad_x);
  }
}

ForwardRecord Network::record(const BatchTrace& trace, std::size_t sample) const {
  if (sample >= trace.batch) throw std::out_of_range("record: sample index out of range");
  const std::size_t T = cfg_.timesteps;
  ForwardRecord rec;
  for (std::size_t n = 0; n < geometry_.size(); ++n) {
    const LayerGeometry& g = geometry_[n];
    const LayerTrace& lt = trace.layers[n];
    const Shape full{T, g.out_c, g.out_h, g.out_w};
    const Shape pooled{T, g.out_c, g.pooled_h, g.pooled_w};
    rec.layers.push_back({copy_block(lt.current, sample, full), copy_block(lt.u, sample, full),
                          copy_block(lt.s, sample, full), copy_block(lt.pooled.out, sample, pooled)});
  }
  const std::size_t K = cfg_.num_classes;
  rec.logits = copy_block(trace.logits, sample, Shape{K});
  return rec;
}

Tensor stack_frames(std::span<const FrameSequence* const> seqs) {
  if (seqs.empty()) throw ShapeError("stack_frames: empty batch");
  const Shape& s = seqs.front()->frames.shape();
  Shape shape{seqs.size()};
  shape.insert(shape.end(), s.begin(), s.end());
  Tensor out(shape);
  const std::size_t n = shape_size(s);
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    require_shape(seqs[b]->frames, s, "stack_frames");
    std::copy(seqs[b]->frames.values().begin(), seqs[b]->frames.values().end(), out.data() + b * n);
  }
  return out;
}

std::pair<Tensor, std::optional<ForwardRecord>> network_forward(const Network& net, NetworkParams& params,
                                                                const FrameSequence& frames, bool record) {
  if (frames.timesteps != net.config().timesteps) {
    throw ShapeError("network_forward: frame sequence has " + std::to_string(frames.timesteps) +
                     " timesteps, network expects " + std::to_string(net.config().timesteps));
  }
  const FrameSequence* one[] = {&frames};
  BatchTrace trace = net.forward(params, stack_frames(one), NormMode::eval);
  std::optional<ForwardRecord> rec;
  if (record) rec = net.record(trace, 0);
  Tensor logits = trace.logits.reshaped(Shape{net.config().num_classes});
  return {std::move(logits), std::move(rec)};
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
