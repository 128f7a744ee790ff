#include "doctest.h"

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "spikeforge/snn_core/config.hpp"
#include "spikeforge/snn_core/network.hpp"

using namespace spikeforge;

namespace {

NetworkConfig small_config() {
  NetworkConfig cfg;
  cfg.in_height = 16;
  cfg.in_width = 16;
  cfg.timesteps = 4;
  cfg.layers = {ConvLayerSpec{4, 3, 1, 1, PoolKind::max, 2}, ConvLayerSpec{6, 3, 1, 1, PoolKind::max, 2}};
  cfg.num_classes = 3;
  cfg.asa_reduction = 2;
  return cfg;
}

FrameSequence random_frames(const NetworkConfig& cfg, std::mt19937_64& rng) {
  FrameSequence f;
  f.timesteps = cfg.timesteps;
  f.dt_ms = 8;
  f.frames = testing_util::random_binary({cfg.timesteps, cfg.in_channels, cfg.in_height, cfg.in_width}, rng, 0.2);
  return f;
}

}  // namespace

TEST_CASE("zero input gives zero spikes and uniform logits") {
  for (bool asa : {false, true}) {
    NetworkConfig cfg = small_config();
    cfg.asa_enabled = asa;
    const Network net(cfg);
    NetworkParams params = init_network(cfg, 3);
    FrameSequence f;
    f.timesteps = cfg.timesteps;
    f.frames = Tensor({cfg.timesteps, 2, 16, 16});
    const auto [logits, rec] = network_forward(net, params, f, true);
    REQUIRE(rec);
    for (const auto& l : rec->layers) CHECK(sum(l.s) == 0);
    for (std::size_t k = 1; k < logits.size(); ++k) CHECK(logits[k] == logits[0]);
  }
}

TEST_CASE("recording does not change the forward pass") {
  std::mt19937_64 rng(8);
  NetworkConfig cfg = small_config();
  cfg.asa_enabled = true;
  const Network net(cfg);
  NetworkParams params = init_network(cfg, 5);
  for (int rep = 0; rep < 4; ++rep) {
    const FrameSequence f = random_frames(cfg, rng);
    const auto a = network_forward(net, params, f, false);
    const auto b = network_forward(net, params, f, true);
    CHECK_FALSE(a.second);
    REQUIRE(b.second);
    CHECK(a.first == b.first);
    CHECK(b.second->logits == b.first);
    for (const auto& l : b.second->layers) {
      CHECK(l.s.shape() == l.u.shape());
      for (real v : l.s.values()) CHECK((v == 0 || v == 1));
      for (std::size_t i = 0; i < l.u.size(); ++i) CHECK(l.s[i] == (l.u[i] >= cfg.lif.v_th ? 1 : 0));
    }
  }
}

TEST_CASE("single layer network matches a hand-stepped oracle") {
  NetworkConfig cfg;
  cfg.in_channels = 1;
  cfg.in_height = 2;
  cfg.in_width = 2;
  cfg.timesteps = 3;
  cfg.layers = {ConvLayerSpec{1, 1, 1, 0, PoolKind::max, 1}};
  cfg.num_classes = 2;
  cfg.lif.v_th = 0.5;
  cfg.lif.beta = 0.5;
  const Network net(cfg);
  NetworkParams params = init_network(cfg, 1);
  params.layers[0].conv_w.value.fill(1);
  params.readout_w.value = Tensor({2, 4}, std::vector<real>{1, 2, 3, 4, -1, 0, 1, 0});
  params.readout_b.value = Tensor({2}, std::vector<real>{0.25f, 0});

  FrameSequence f;
  f.timesteps = 3;
  f.frames = Tensor({3, 1, 2, 2}, std::vector<real>{0.3f, 0.6f, 0, 1, 0.3f, 0, 0, 1, 0.3f, 0.6f, 0, 0});
  const auto [logits, rec] = network_forward(net, params, f, true);

  const real gain = real(1) / std::sqrt(real(1) + cfg.bn_eps);
  double rate[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < 4; ++i) {
    real h = 0;
    for (std::size_t t = 0; t < 3; ++t) {
      const real u = h + f.frames[t * 4 + i] * gain;
      const real s = u >= real(0.5) ? 1 : 0;
      CHECK(rec->layers[0].u[t * 4 + i] == doctest::Approx(u));
      CHECK(rec->layers[0].s[t * 4 + i] == s);
      h = s ? real(0) : real(0.5) * u;
      rate[i] += s / 3.0;
    }
  }
  // pixel 0: 0.3, 0.45, 0.525 -> fires at t=2 only
  CHECK(rate[0] == doctest::Approx(1.0 / 3));
  const double l0 = 0.25 + rate[0] + 2 * rate[1] + 3 * rate[2] + 4 * rate[3];
  const double l1 = -rate[0] + rate[2];
  CHECK(logits[0] == doctest::Approx(l0));
  CHECK(logits[1] == doctest::Approx(l1));
}

TEST_CASE("paired initialization shares every common tensor") {
  NetworkConfig van = small_config();
  NetworkConfig asa = van;
  asa.asa_enabled = true;
  NetworkParams a = init_network(van, 12);
  NetworkParams b = init_network(asa, 12);
  CHECK(shared_init_hash(a) == shared_init_hash(b));
  CHECK(a.layers[1].conv_w.value == b.layers[1].conv_w.value);
  CHECK(a.readout_w.value == b.readout_w.value);
  REQUIRE(b.layers[0].asa);
  CHECK(b.layers[0].asa->alpha.value[0] == real(0.5));
  NetworkParams c = init_network(van, 13);
  CHECK(shared_init_hash(c) != shared_init_hash(a));
}

TEST_CASE("layer planning") {
  NetworkConfig cfg = small_config();
  const auto g = plan_layers(cfg);
  REQUIRE(g.size() == 2);
  CHECK(g[0].out_h == 16);
  CHECK(g[0].pooled_h == 8);
  CHECK(g[1].in_c == 4);
  CHECK(g[1].pooled_size() == 6 * 4 * 4);
  CHECK(Network(cfg).feature_size() == 96);

  NetworkConfig odd = cfg;
  odd.layers[0].pool_window = 17;
  CHECK_THROWS_AS(plan_layers(odd), ConfigError);
  NetworkConfig bad_r = cfg;
  bad_r.asa_enabled = true;
  bad_r.asa_reduction = 3;
  CHECK_THROWS_AS(plan_layers(bad_r), ConfigError);
  NetworkConfig bad_k = cfg;
  bad_k.asa_enabled = true;
  bad_k.asa_k = 5;
  CHECK_THROWS_AS(plan_layers(bad_k), ConfigError);
  NetworkConfig bad_beta = cfg;
  bad_beta.lif.beta = 1;
  CHECK_THROWS_AS(plan_layers(bad_beta), ConfigError);
}

TEST_CASE("config text") {
  const RunConfig def = parse_run_config(std::string(""));
  CHECK(def.network.timesteps == 8);
  CHECK(def.network.layers.size() == 2);

  const RunConfig cfg = parse_run_config(std::string(
      "# comment\n"
      "timesteps = 4\n"
      "conv = 8 3 1 1 avg 2\n"
      "conv = 8 3 1 1 max 1\n"
      "asa = asa2\n"
      "grad_clip = none\n"
      "seed = 77\n"));
  CHECK(cfg.network.timesteps == 4);
  REQUIRE(cfg.network.layers.size() == 2);
  CHECK(cfg.network.layers[0].pool == PoolKind::avg);
  CHECK(cfg.network.asa_enabled);
  CHECK(cfg.network.asa_variant == AsaVariant::asa2);
  CHECK_FALSE(cfg.train.grad_clip);
  CHECK(cfg.train.seed == 77);

  const RunConfig again = parse_run_config(to_config_text(cfg));
  CHECK(to_config_text(again) == to_config_text(cfg));
  CHECK(config_hash(again) == config_hash(cfg));

  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_run_config(text);
    } catch (const ConfigError& e) {
      return e.line();
    }
    return 999;
  };
  CHECK(line_of("timesteps = 4\n\nbogus = 1\n") == 3);
  CHECK(line_of("timesteps = four\n") == 1);
  CHECK(line_of("seed = 1\nconv = 1 2 3\n") == 2);
  CHECK(line_of("a line without equals\n") == 1);
  CHECK(line_of("fire = sometimes\n") == 1);
  CHECK(line_of("timesteps = 0\n") == 0);
  try {
    parse_run_config(std::string("x\n"));
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("line 1:", 0) == 0);
  }
}
