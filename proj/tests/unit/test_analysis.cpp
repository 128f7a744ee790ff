#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "spikeforge/analysis/bundle.hpp"
#include "spikeforge/analysis/mpd.hpp"
#include "spikeforge/analysis/report.hpp"
#include "spikeforge/analysis/sfr.hpp"
#include "spikeforge/training/trainer.hpp"

using namespace spikeforge;
using testing_util::random_binary;
using testing_util::random_tensor;

namespace {

MPDHistogram hist(std::vector<std::uint64_t> counts, double lo, double width) {
  MPDHistogram h;
  h.counts = std::move(counts);
  for (std::size_t i = 0; i <= h.counts.size(); ++i) h.bin_edges.push_back(lo + width * static_cast<double>(i));
  return h;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("firing rates") {
  // one layer, 1 channel of 1x2 neurons, T=2, four samples
  SFRAccumulator acc({MapShape{1, 1, 2}}, 2);
  const std::vector<std::vector<real>> samples{{1, 0, 1, 0}, {1, 0, 0, 0}, {1, 0, 1, 0}, {1, 0, 1, 0}};
  for (const auto& v : samples) {
    const Tensor s({2, 1, 1, 2}, v);
    acc.add({&s});
  }
  const auto n = n_sfr(acc, 0);
  CHECK(n[0] == 1.0);
  CHECK(n[1] == 0.0);
  CHECK(n[2] == 0.75);
  CHECK(n[3] == 0.0);
  const auto c = c_sfr(acc, 0);
  CHECK(c[0] == 0.5);
  CHECK(c[1] == 0.375);
  const auto t = t_sfr(acc);
  CHECK(t[0] == 0.5);
  CHECK(t[1] == 0.375);
  CHECK(nasfr(acc) == 0.4375);

  const auto f = spike_features(acc, 0);
  REQUIRE(f.size() == 2);
  CHECK(f[1].timestep == 1);
  CHECK(f[1].map.shape() == Shape{1, 2});
  CHECK(f[1].map[0] == 0.75);

  SFRAccumulator ones({MapShape{2, 2, 2}}, 3);
  const Tensor all({3, 2, 2, 2}, real(1));
  ones.add({&all});
  CHECK(nasfr(ones) == 1.0);
  for (double v : c_sfr(ones, 0)) CHECK(v == 1.0);
  for (double v : t_sfr(ones)) CHECK(v == 1.0);

  SFRAccumulator dot({MapShape{3, 1, 1}}, 2);
  const Tensor d({2, 3, 1, 1}, std::vector<real>{1, 0, 1, 1, 1, 0});
  dot.add({&d});
  const auto fd = spike_features(dot, 0);
  CHECK(fd.size() == 6);
  const auto nd = n_sfr(dot, 0);
  for (std::size_t i = 0; i < 6; ++i) CHECK(fd[i].map[0] == nd[i]);
}

TEST_CASE("rate identities on random layers") {
  std::mt19937_64 rng(10);
  const std::vector<MapShape> shapes{{4, 6, 6}, {8, 3, 3}};
  SFRAccumulator acc(shapes, 5);
  for (int s = 0; s < 37; ++s) {
    const Tensor a = random_binary({5, 4, 6, 6}, rng, 0.2);
    const Tensor b = random_binary({5, 8, 3, 3}, rng, 0.5);
    acc.add({&a, &b});
  }
  const auto t = t_sfr(acc);
  CHECK(nasfr(acc) == doctest::Approx(std::accumulate(t.begin(), t.end(), 0.0) / 5).epsilon(1e-15));
  for (std::size_t l = 0; l < 2; ++l) {
    for (double v : n_sfr(acc, l)) CHECK((v >= 0 && v <= 1));
    for (double v : c_sfr(acc, l)) CHECK((v >= 0 && v <= 1));
  }
}

TEST_CASE("cosine and ghost pairs") {
  const real a[] = {1, 2, 0, 3};
  const real half[] = {0.5f, 1, 0, 1.5f};
  const real e0[] = {1, 0, 0, 0};
  const real e1[] = {0, 1, 0, 0};
  const real z[] = {0, 0, 0, 0};
  CHECK(cosine_similarity(a, a) == doctest::Approx(1));
  CHECK(cosine_similarity(a, half) == doctest::Approx(1));
  CHECK(cosine_similarity(e0, e1) == 0);
  CHECK(cosine_similarity(a, z) == 0);

  std::vector<SpikeFeature> f(3);
  f[0].channel = 0;
  f[0].map = Tensor({2, 2}, std::vector<real>{1, 2, 0, 3});
  f[1].channel = 1;
  f[1].map = Tensor({2, 2}, std::vector<real>{0.5f, 1, 0, 1.5f});
  f[2].channel = 2;
  f[2].map = Tensor({2, 2}, std::vector<real>{0, 0, 1, 0});
  const auto g = ghost_pairs(f, 0.9);
  REQUIRE(g.size() == 1);
  CHECK(g[0].c_i == 0);
  CHECK(g[0].c_j == 1);
}

TEST_CASE("membrane potential histograms") {
  const HistogramRange r{10, 0, 1};
  const std::vector<real> same(20, real(0.55));
  const MPDHistogram h = mpd(same, r);
  CHECK(h.counts[5] == 20);
  CHECK(h.variance == 0);
  CHECK(h.mean == doctest::Approx(0.55));

  std::vector<real> grid;
  for (int i = 0; i < 100; ++i) grid.push_back(static_cast<real>((i + 0.5) / 100));
  for (auto c : mpd(grid, r).counts) CHECK(c == 10);

  std::mt19937_64 rng(12);
  const Tensor v = random_tensor({1000}, rng, -1.5, 2.5);
  const MPDHistogram rh = mpd(v.values(), r);
  std::vector<std::uint64_t> oracle(10, 0);
  double m = 0;
  for (real x : v.values()) {
    const long b = static_cast<long>(std::floor(static_cast<double>(x) * 10));
    ++oracle[static_cast<std::size_t>(std::clamp(b, 0L, 9L))];
    m += x / 1000.0;
  }
  double var = 0;
  for (real x : v.values()) var += (x - m) * (x - m) / 1000.0;
  CHECK(rh.counts == oracle);
  CHECK(std::accumulate(rh.counts.begin(), rh.counts.end(), std::uint64_t{0}) == 1000);
  CHECK(rh.mean == doctest::Approx(m).epsilon(1e-6));
  CHECK(rh.variance == doctest::Approx(var).epsilon(1e-6));

  const HistogramRange around = HistogramRange::around(0.5);
  CHECK(around.lo == -2.5);
  CHECK(around.hi == 3.5);
  CHECK(around.bins == 50);
}

TEST_CASE("mpd accumulator merges in any order") {
  std::mt19937_64 rng(13);
  const std::vector<MapShape> shapes{{2, 3, 3}};
  std::vector<Tensor> us;
  for (int i = 0; i < 12; ++i) us.push_back(random_tensor({2, 2, 3, 3}, rng, -3, 4));
  MPDAccumulator all(shapes, 2, HistogramRange::around(0.5));
  MPDAccumulator a(shapes, 2, HistogramRange::around(0.5)), b(shapes, 2, HistogramRange::around(0.5));
  for (int i = 0; i < 12; ++i) all.add(0, us[i]);
  for (int i = 11; i >= 0; --i) (i % 2 ? a : b).add(0, us[i]);
  b.merge(a);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t t = 0; t < 2; ++t) {
      const MPDHistogram x = all.histogram(0, c, t), y = b.histogram(0, c, t);
      CHECK(x.counts == y.counts);
      CHECK(x.mean == y.mean);
      CHECK(x.variance == y.variance);
      CHECK(x.n == 12 * 9);
    }
}

TEST_CASE("peak to threshold distance and labels") {
  // symmetric about v_th = 0.5 with the three fullest bins centered there
  const MPDHistogram sym = hist({1, 2, 5, 9, 5, 2, 1}, 0.5 - 3.5 * 0.1, 0.1);
  CHECK(ptd(sym, 0.5) == doctest::Approx(0).scale(1));

  // all mass in bin 4 (midpoint 0.45); the remaining picks are the two
  // lowest-index empty bins, midpoints 0.05 and 0.15
  const MPDHistogram one = hist({0, 0, 0, 0, 7, 0}, 0, 0.1);
  CHECK(ptd(one, 0.5) == doctest::Approx((0.45 + 0.05 + 0.15) / 3 - 0.5));

  const double delta = 0.37;
  const MPDHistogram moved = hist({3, 8, 1, 6, 0, 2}, delta, 0.1);
  const MPDHistogram base = hist({3, 8, 1, 6, 0, 2}, 0, 0.1);
  CHECK(ptd(moved, 0.5) == doctest::Approx(ptd(base, 0.5) + delta));

  CHECK(classify_pattern(0.2, 0.3) == Pattern::noise);
  CHECK(classify_pattern(-1.0, 0.3) == Pattern::normal);
  CHECK(classify_pattern(0.2, 0.0) == Pattern::null);
  CHECK(classify_pattern(-0.04, 0.1) == Pattern::noise);
  CHECK(classify_pattern(-0.06, 0.1) == Pattern::normal);
  CHECK(to_string(Pattern::null) == "null");
}

TEST_CASE("quantization error") {
  QEAccumulator q(1);
  q.add(0, Tensor({1}, real(0.5)), Tensor({1}, real(1)));
  CHECK(q.overall() == 0.25);
  QEAccumulator z(1);
  z.add(0, Tensor({1}, real(0)), Tensor({1}, real(0)));
  CHECK(z.overall() == 0);

  std::mt19937_64 rng(14);
  QEAccumulator acc(2);
  double sum = 0;
  std::size_t n = 0;
  std::vector<Tensor> store;
  for (int i = 0; i < 10; ++i) {
    for (std::size_t l = 0; l < 2; ++l) {
      Tensor u = random_tensor({3, 2, 4, 4}, rng, -2, 3);
      Tensor s(u.shape());
      for (std::size_t k = 0; k < u.size(); ++k) s[k] = u[k] >= real(0.5) ? 1 : 0;
      acc.add(l, u, s);
      for (std::size_t k = 0; k < u.size(); ++k) sum += std::pow(static_cast<double>(u[k]) - s[k], 2);
      n += u.size();
      store.push_back(std::move(u));
      store.push_back(std::move(s));
    }
  }
  CHECK(acc.overall() == doctest::Approx(sum / static_cast<double>(n)).epsilon(1e-6));
  std::vector<const Tensor*> us, ss;
  for (std::size_t i = 0; i < store.size(); i += 2) {
    us.push_back(&store[i]);
    ss.push_back(&store[i + 1]);
  }
  CHECK(quantization_error(us, ss) == doctest::Approx(sum / static_cast<double>(n)).epsilon(1e-12));
}

TEST_CASE("analysis files do not depend on sample order") {
  NetworkConfig cfg;
  cfg.in_height = 16;
  cfg.in_width = 16;
  cfg.timesteps = 4;
  cfg.layers = {ConvLayerSpec{4, 3, 1, 1, PoolKind::max, 2}, ConvLayerSpec{4, 3, 1, 1, PoolKind::max, 2}};
  cfg.asa_enabled = true;
  cfg.asa_reduction = 2;
  const Network net(cfg);
  NetworkParams params = init_network(cfg, 2);
  for (auto& l : params.layers) l.bn_beta.value.fill(real(0.3));

  std::mt19937_64 rng(15);
  LabeledFrames data;
  for (int i = 0; i < 24; ++i) {
    FrameSequence f;
    f.timesteps = 4;
    f.frames = random_binary({4, 2, 16, 16}, rng, 0.15);
    data.frames.push_back(std::move(f));
    data.labels.push_back(i % 4);
  }
  LabeledFrames shuffled = data;
  std::vector<std::size_t> perm(24);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 0; i < 24; ++i) {
    shuffled.frames[i] = data.frames[perm[i]];
    shuffled.labels[i] = data.labels[perm[i]];
  }

  const auto root = std::filesystem::temp_directory_path() / "spikeforge_perm_test";
  std::filesystem::remove_all(root);
  const EvalResult a = evaluate(net, params, data, AnalysisConfig{}, {}, 5);
  const EvalResult b = evaluate(net, params, shuffled, AnalysisConfig{}, {}, 7);
  CHECK(a.correct == b.correct);
  const auto files = write_analysis(*a.analysis, root / "a");
  const auto files_b = write_analysis(*b.analysis, root / "b");
  CHECK(files == files_b);
  CHECK(std::find(files.begin(), files.end(), "sfr.csv") != files.end());
  CHECK(std::find(files.begin(), files.end(), "patterns.csv") != files.end());
  for (const auto& f : files) CHECK_MESSAGE(slurp(root / "a" / f) == slurp(root / "b" / f), f);

  const auto rows = a.analysis->patterns();
  CHECK(rows.size() == 2 * 4 * 4);
  double total = 0;
  for (Pattern p : {Pattern::noise, Pattern::normal, Pattern::null}) total += a.analysis->pattern_fraction(p);
  CHECK(total == doctest::Approx(1));
  std::filesystem::remove_all(root);
}
