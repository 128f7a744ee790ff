#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "spikeforge/event_data/events.hpp"
#include "spikeforge/training/checkpoint.hpp"
#include "spikeforge/training/loss.hpp"
#include "spikeforge/training/optimizer.hpp"
#include "spikeforge/training/trainer.hpp"

using namespace spikeforge;

namespace {

RunConfig tiny_run(bool asa) {
  RunConfig cfg;
  NetworkConfig& n = cfg.network;
  n.in_height = 16;
  n.in_width = 16;
  n.timesteps = 4;
  n.layers = {ConvLayerSpec{4, 3, 1, 1, PoolKind::max, 2}, ConvLayerSpec{8, 3, 1, 1, PoolKind::max, 2}};
  n.num_classes = 4;
  n.asa_enabled = asa;
  n.asa_reduction = 2;
  cfg.train.dt_ms = 16;
  cfg.train.batch_size = 4;
  cfg.train.learning_rate = 5e-3;
  cfg.train.seed = 21;
  return cfg;
}

LabeledFrames tiny_data(const RunConfig& cfg, std::size_t per_class, std::uint64_t seed) {
  SynthParams p;
  p.n_per_class = per_class;
  p.height = 16;
  p.width = 16;
  p.seed = seed;
  const auto streams = synth_motion_dataset(p);
  return bin_dataset(streams, cfg);
}

std::filesystem::path tmp(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_CASE("cross entropy") {
  const auto [uniform, g] = rate_ce_loss(Tensor({5}, real(0.3)), 2);
  CHECK(uniform == doctest::Approx(std::log(5.0)));
  CHECK(g[2] == doctest::Approx(0.2 - 1));
  CHECK(g[0] == doctest::Approx(0.2));

  Tensor big({3});
  big[1] = 60;
  CHECK(rate_ce_loss(big, 1).first < 1e-6);
  CHECK(std::isfinite(rate_ce_loss(big, 0).first));

  const Tensor logits({2, 2}, std::vector<real>{1, 0, 0, 1});
  const int labels[] = {0, 0};
  const BatchLoss bl = rate_ce_loss_batch(logits, labels);
  CHECK(bl.correct == 1);
  CHECK(bl.loss == doctest::Approx(std::log(1 + std::exp(-1.0)) / 2 + std::log(1 + std::exp(1.0)) / 2));
  CHECK(bl.grad_logits.at(0, 1) == doctest::Approx(0.5 / (1 + std::exp(1.0))));

  const real tie[] = {2, 5, 5};
  CHECK(argmax(tie) == 1);
}

TEST_CASE("optimizer steps") {
  OptimizerSettings sgd;
  sgd.kind = OptimizerKind::sgd_momentum;
  sgd.learning_rate = 0.1;
  sgd.momentum = 0.9;

  GradPair x(Tensor({1}, real(2)));
  std::vector<GradPair*> list{&x};
  Optimizer opt(sgd);
  opt.step(list);  // zero gradient
  CHECK(x.value[0] == 2);

  Optimizer quad(sgd);
  x.grad[0] = 2 * x.value[0];  // f = x^2
  quad.step(list);
  CHECK(x.value[0] == doctest::Approx(1.6));
  x.grad[0] = 2 * x.value[0];
  quad.step(list);  // v = 0.9 * 4 + 3.2
  CHECK(x.value[0] == doctest::Approx(1.6 - 0.68));
  CHECK(quad.steps() == 2);

  OptimizerSettings adam;
  adam.learning_rate = 0.01;
  GradPair w(Tensor({4}, std::vector<real>{1, 1, 1, 1}));
  w.grad = Tensor({4}, std::vector<real>{3, -0.5f, 1e-3f, -7});
  std::vector<GradPair*> wl{&w};
  Optimizer a(adam);
  a.step(wl);
  const real expect[] = {0.99f, 1.01f, 0.99f, 1.01f};
  for (std::size_t i = 0; i < 4; ++i) CHECK(w.value[i] == doctest::Approx(expect[i]).epsilon(1e-4));

  GradPair big(Tensor({2}));
  big.grad = Tensor({2}, std::vector<real>{3, 4});
  std::vector<GradPair*> bl{&big};
  CHECK(grad_norm(bl) == doctest::Approx(5));
  CHECK(clip_grad_norm(bl, 1) == doctest::Approx(5));
  CHECK(big.grad[0] == doctest::Approx(0.6));
  CHECK(grad_norm(bl) == doctest::Approx(1));
}

TEST_CASE("training emits one row per epoch and is deterministic") {
  RunConfig cfg = tiny_run(true);
  cfg.train.epochs = 1;
  const LabeledFrames data = tiny_data(cfg, 2, 3);
  REQUIRE(data.size() == 8);
  std::size_t rows = 0;
  const TrainResult a = train(cfg, data, [&](const EpochMetrics& m) {
    ++rows;
    CHECK(m.epoch == 1);
    CHECK(std::isfinite(m.loss));
    CHECK(m.nasfr >= 0);
    CHECK(m.nasfr <= 1);
  });
  CHECK(rows == 1);
  CHECK(a.metrics.size() == 1);

  const TrainResult b = train(cfg, data);
  CHECK(a.metrics[0].loss == b.metrics[0].loss);
  CHECK(a.init_hash == b.init_hash);
  NetworkParams pa = a.params, pb = b.params;
  pa.for_each_trainable([&](const std::string& name, GradPair& g) {
    bool same = false;
    pb.for_each_trainable([&](const std::string& other, GradPair& h) {
      if (other == name) {
        same = g.value == h.value;
        if (!same) MESSAGE(name, " ", g.value[0], " vs ", h.value[0]);
      }
    });
    CHECK_MESSAGE(same, name);
  });

  const TrainResult van = train(tiny_run(false), data);
  CHECK(van.init_hash == a.init_hash);  // paired runs start from the same shared weights
}

TEST_CASE("two-sample memorization") {
  RunConfig cfg = tiny_run(false);
  cfg.train.epochs = 5;
  cfg.train.batch_size = 2;
  cfg.train.learning_rate = 1e-2;
  LabeledFrames all = tiny_data(cfg, 1, 5);
  LabeledFrames two;
  two.frames = {all.frames[0], all.frames[1]};
  two.labels = {all.labels[0], all.labels[1]};
  const TrainResult r = train(cfg, two);
  REQUIRE(r.metrics.size() == 5);
  for (std::size_t e = 1; e < 5; ++e) CHECK(r.metrics[e].loss < r.metrics[e - 1].loss);

  cfg.train.epochs = 30;
  TrainResult full = train(cfg, two);
  const Network net(cfg.network);
  const EvalResult ev = evaluate(net, full.params, two);
  CHECK(ev.total == 2);
  CHECK(ev.accuracy == 1.0);
}

TEST_CASE("untrained network is at chance on a balanced set") {
  RunConfig cfg = tiny_run(false);
  const LabeledFrames data = tiny_data(cfg, 50, 99);
  const Network net(cfg.network);
  NetworkParams params = init_network(cfg.network, 4);
  const EvalResult ev = evaluate(net, params, data);
  CHECK(ev.total == 200);
  CHECK(std::abs(ev.accuracy - 0.25) <= 0.1);

  std::size_t seen = 0;
  const EvalResult rec = evaluate(net, params, data, AnalysisConfig{}, [&](std::size_t i, const ForwardRecord&) {
    CHECK(i == seen);
    ++seen;
  });
  CHECK(seen == 200);
  CHECK(rec.correct == ev.correct);
  REQUIRE(rec.analysis);
  CHECK(rec.analysis->samples() == 200);
}

TEST_CASE("checkpoint round trip") {
  RunConfig cfg = tiny_run(true);
  cfg.train.epochs = 1;
  const LabeledFrames data = tiny_data(cfg, 2, 8);
  TrainResult r = train(cfg, data);
  const Network net(cfg.network);
  const auto path = tmp("spikeforge_ckpt_test.bin");
  save_checkpoint(path, cfg, r.params, {{"note", "x"}});

  Checkpoint ck = load_checkpoint(path);
  CHECK(to_config_text(ck.config) == to_config_text(cfg));
  CHECK(ck.meta["note"] == "x");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto a = network_forward(net, r.params, data.frames[i], false).first;
    const auto b = network_forward(net, ck.params, data.frames[i], false).first;
    CHECK(a == b);
  }

  // the manifest names every trainable tensor and buffer
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
  const auto manifest = nlohmann::json::parse(bytes.substr(16, len));
  std::set<std::string> names;
  for (const auto& t : manifest["tensors"]) names.insert(t["name"].get<std::string>());
  std::size_t expected = 0;
  r.params.for_each_trainable([&](const std::string& name, GradPair&) {
    ++expected;
    CHECK_MESSAGE(names.count(name), name);
  });
  r.params.for_each_buffer([&](const std::string& name, Tensor&) {
    ++expected;
    CHECK_MESSAGE(names.count(name), name);
  });
  CHECK(names.size() == expected);
  CHECK(names.count("layer0.asa.alpha"));
  CHECK(names.count("layer1.asa.gamma"));

  bytes[0] = 'X';
  const auto bad = tmp("spikeforge_ckpt_bad.bin");
  std::ofstream(bad, std::ios::binary) << bytes;
  CHECK_THROWS_AS(load_checkpoint(bad), CheckpointError);
  std::ofstream(bad, std::ios::binary) << bytes.substr(0, 3);
  CHECK_THROWS_AS(load_checkpoint(bad), CheckpointError);
  std::filesystem::remove(bad);
  std::filesystem::remove(path);
}
