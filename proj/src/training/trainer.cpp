#include "spikeforge/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "spikeforge/training/loss.hpp"
#include "spikeforge/training/optimizer.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {
namespace {

std::uint64_t count_spikes(const Tensor& s) {
  std::uint64_t n = 0;
  for (real v : s.values()) n += v != real(0);
  return n;
}

bool params_finite(NetworkParams& params) {
  bool ok = true;
  params.for_each_trainable([&](const std::string&, GradPair& p) { ok = ok && all_finite(p.value); });
  return ok;
}

}  // namespace

LabeledFrames bin_dataset(std::span<const EventStream> streams, const RunConfig& cfg) {
  LabeledFrames out;
  out.frames.reserve(streams.size());
  for (std::size_t i = 0; i < streams.size(); ++i) {
    const EventStream& s = streams[i];
    if (!s.label) throw std::invalid_argument("bin_dataset: stream " + std::to_string(i) + " has no label");
    if (*s.label < 0 || static_cast<std::size_t>(*s.label) >= cfg.network.num_classes) {
      throw std::invalid_argument("bin_dataset: stream " + std::to_string(i) + " label " + std::to_string(*s.label) +
                                  " outside the configured classes");
    }
    if (s.width != cfg.network.in_width || s.height != cfg.network.in_height) {
      throw std::invalid_argument("bin_dataset: stream " + std::to_string(i) + " is " + std::to_string(s.width) +
                                  "x" + std::to_string(s.height) + ", network expects " +
                                  std::to_string(cfg.network.in_width) + "x" + std::to_string(cfg.network.in_height));
    }
    out.frames.push_back(bin_frames(s, cfg.train.dt_ms, cfg.network.timesteps, cfg.train.bin_mode));
    out.labels.push_back(*s.label);
  }
  return out;
}

TrainResult train(const RunConfig& cfg, const LabeledFrames& data, const EpochCallback& on_epoch) {
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (cfg.train.batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
  const Network net(cfg.network);
  TrainResult res;
  res.params = init_network(cfg.network, cfg.train.seed);
  res.init_hash = shared_init_hash(res.params);
  Optimizer opt(OptimizerSettings::from(cfg.train));
  const std::vector<GradPair*> trainables = trainable_list(res.params);

  std::size_t neurons = 0;
  for (const LayerGeometry& g : net.geometry()) neurons += g.neurons();
  const std::size_t T = cfg.network.timesteps;

  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(splitmix64(cfg.train.seed ^ (0x5bd1e995ULL * epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0;
    std::size_t correct = 0;
    std::uint64_t spikes = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.train.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.train.batch_size);
      std::vector<const FrameSequence*> batch;
      std::vector<int> labels;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&data.frames[order[i]]);
        labels.push_back(data.labels[order[i]]);
      }
      const BatchTrace trace = net.forward(res.params, stack_frames(batch), NormMode::train);
      const BatchLoss bl = rate_ce_loss_batch(trace.logits, labels);
      if (!std::isfinite(bl.loss)) throw DivergenceError(epoch, "non-finite loss");
      loss_sum += bl.loss * static_cast<double>(batch.size());
      correct += bl.correct;
      for (const LayerTrace& lt : trace.layers) spikes += count_spikes(lt.s);

      res.params.zero_grad();
      net.bptt(res.params, trace, bl.grad_logits);
      opt.step(trainables);
    }
    if (!params_finite(res.params)) throw DivergenceError(epoch, "non-finite parameters");

    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(data.size());
    m.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    m.nasfr = static_cast<double>(spikes) / (static_cast<double>(data.size()) * static_cast<double>(T * neurons));
    res.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return res;
}

EvalResult evaluate(const Network& net, NetworkParams& params, const LabeledFrames& data,
                    std::optional<AnalysisConfig> analysis, const RecordCallback& on_record,
                    std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("evaluate: batch_size must be >= 1");
  EvalResult res;
  res.total = data.size();
  if (analysis) res.analysis.emplace(net, *analysis);
  const std::size_t K = net.config().num_classes;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    std::vector<const FrameSequence*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&data.frames[i]);
    const BatchTrace trace = net.forward(params, stack_frames(batch), NormMode::eval);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (argmax(trace.logits.values().subspan(b * K, K)) == static_cast<std::size_t>(data.labels[start + b])) {
        ++res.correct;
      }
      if (res.analysis || on_record) {
        const ForwardRecord rec = net.record(trace, b);
        if (res.analysis) res.analysis->add(rec);
        if (on_record) on_record(start + b, rec);
      }
    }
  }
  res.accuracy = res.total ? static_cast<double>(res.correct) / static_cast<double>(res.total) : 0.0;
  return res;
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
