#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "spikeforge/analysis/bundle.hpp"
#include "spikeforge/event_data/events.hpp"
#include "spikeforge/snn_core/network.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

struct LabeledFrames {
  std::vector<FrameSequence> frames;
  std::vector<int> labels;

  std::size_t size() const noexcept { return frames.size(); }
};

/// Bins every stream with the run's dt, T and bin mode. Streams must be labeled.
LabeledFrames bin_dataset(std::span<const EventStream> streams, const RunConfig& cfg);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double loss = 0;
  double accuracy = 0;  // training accuracy over the epoch
  double nasfr = 0;     // mean firing rate over all neurons, samples and timesteps
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, const std::string& detail)
      : std::runtime_error("training diverged in epoch " + std::to_string(epoch) + ": " + detail), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

struct TrainResult {
  NetworkParams params;
  std::vector<EpochMetrics> metrics;
  std::uint64_t init_hash = 0;  // shared_init_hash before the first step
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Deterministic given (cfg, data): fixed init from cfg.train.seed and a
/// seeded shuffle per epoch. Throws DivergenceError on a non-finite loss.
TrainResult train(const RunConfig& cfg, const LabeledFrames& data, const EpochCallback& on_epoch = {});

struct EvalResult {
  double accuracy = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::optional<AnalysisBundle> analysis;
};

using RecordCallback = std::function<void(std::size_t index, const ForwardRecord& rec)>;

/// Eval-mode pass over `data`. With `analysis` set, every sample's forward
/// record is folded into a bundle built from that configuration; `on_record`
/// sees the same records in sample order.
EvalResult evaluate(const Network& net, NetworkParams& params, const LabeledFrames& data,
                    std::optional<AnalysisConfig> analysis = std::nullopt, const RecordCallback& on_record = {},
                    std::size_t batch_size = 16);

}  // namespace spikeforge::inline SPIKEFORGE_ABI
