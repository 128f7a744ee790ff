#include "spikeforge/snn_core/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

namespace spikeforge::inline SPIKEFORGE_ABI {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
std::string num(T v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T>
T parse_number(const std::string& value, std::size_t line, const std::string& key) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("invalid value '" + value + "' for '" + key + "'", line);
  }
  return out;
}

std::vector<std::string> words(const std::string& value) {
  std::istringstream is(value);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

PoolKind parse_pool(const std::string& w, std::size_t line) {
  if (w == "max") return PoolKind::max;
  if (w == "avg") return PoolKind::avg;
  throw ConfigError("pool kind must be max or avg, got '" + w + "'", line);
}

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string to_string(AsaVariant v) { return v == AsaVariant::asa1 ? "asa1" : "asa2"; }

std::string asa_mode_string(const NetworkConfig& cfg) { return cfg.asa_enabled ? to_string(cfg.asa_variant) : "off"; }

void set_asa_mode(NetworkConfig& cfg, const std::string& mode) {
  if (mode == "off") {
    cfg.asa_enabled = false;
  } else if (mode == "asa1") {
    cfg.asa_enabled = true;
    cfg.asa_variant = AsaVariant::asa1;
  } else if (mode == "asa2") {
    cfg.asa_enabled = true;
    cfg.asa_variant = AsaVariant::asa2;
  } else {
    throw std::invalid_argument("asa mode must be off, asa1 or asa2, got '" + mode + "'");
  }
}

RunConfig parse_run_config(std::istream& in) {
  RunConfig cfg;
  NetworkConfig& net = cfg.network;
  TrainConfig& tr = cfg.train;
  bool saw_conv = false;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line);
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (value.empty()) throw ConfigError("missing value for '" + key + "'", line);
    const auto size_v = [&] { return parse_number<std::size_t>(value, line, key); };
    const auto real_v = [&] { return static_cast<real>(parse_number<double>(value, line, key)); };
    const auto double_v = [&] { return parse_number<double>(value, line, key); };

    if (key == "timesteps") {
      net.timesteps = size_v();
    } else if (key == "input") {
      const auto w = words(value);
      if (w.size() != 3) throw ConfigError("input expects 'channels height width'", line);
      net.in_channels = parse_number<std::size_t>(w[0], line, key);
      net.in_height = parse_number<std::size_t>(w[1], line, key);
      net.in_width = parse_number<std::size_t>(w[2], line, key);
    } else if (key == "conv") {
      const auto w = words(value);
      if (w.size() != 6) throw ConfigError("conv expects 'out_channels kernel stride pad pool window'", line);
      if (!saw_conv) net.layers.clear();
      saw_conv = true;
      ConvLayerSpec spec;
      spec.out_channels = parse_number<std::size_t>(w[0], line, key);
      spec.kernel = parse_number<std::size_t>(w[1], line, key);
      spec.stride = parse_number<std::size_t>(w[2], line, key);
      spec.pad = parse_number<std::size_t>(w[3], line, key);
      spec.pool = parse_pool(w[4], line);
      spec.pool_window = parse_number<std::size_t>(w[5], line, key);
      if (spec.out_channels == 0 || spec.kernel == 0 || spec.stride == 0 || spec.pool_window == 0) {
        throw ConfigError("conv sizes must be positive", line);
      }
      net.layers.push_back(spec);
    } else if (key == "classes") {
      net.num_classes = size_v();
    } else if (key == "v_th") {
      net.lif.v_th = real_v();
    } else if (key == "v_reset") {
      net.lif.v_reset = real_v();
    } else if (key == "beta") {
      net.lif.beta = real_v();
    } else if (key == "surrogate_width") {
      net.lif.surrogate_width = real_v();
    } else if (key == "fire") {
      if (value == "heaviside") {
        net.lif.fire = FireMode::heaviside;
      } else if (value == "relaxed") {
        net.lif.fire = FireMode::relaxed;
      } else {
        throw ConfigError("fire must be heaviside or relaxed", line);
      }
    } else if (key == "asa") {
      try {
        set_asa_mode(net, value);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what(), line);
      }
    } else if (key == "asa_reduction") {
      net.asa_reduction = size_v();
    } else if (key == "asa_k") {
      net.asa_k = size_v();
    } else if (key == "bn_momentum") {
      net.bn_momentum = real_v();
    } else if (key == "bn_eps") {
      net.bn_eps = real_v();
    } else if (key == "epochs") {
      tr.epochs = size_v();
    } else if (key == "batch_size") {
      tr.batch_size = size_v();
    } else if (key == "learning_rate") {
      tr.learning_rate = double_v();
    } else if (key == "optimizer") {
      if (value == "adam") {
        tr.optimizer = OptimizerKind::adam;
      } else if (value == "sgd_momentum") {
        tr.optimizer = OptimizerKind::sgd_momentum;
      } else {
        throw ConfigError("optimizer must be adam or sgd_momentum", line);
      }
    } else if (key == "momentum") {
      tr.momentum = double_v();
    } else if (key == "grad_clip") {
      if (value == "none") {
        tr.grad_clip.reset();
      } else {
        tr.grad_clip = double_v();
      }
    } else if (key == "seed") {
      tr.seed = parse_number<std::uint64_t>(value, line, key);
    } else if (key == "dt_ms") {
      tr.dt_ms = double_v();
    } else if (key == "bin_mode") {
      if (value == "count") {
        tr.bin_mode = BinMode::count;
      } else if (value == "binary") {
        tr.bin_mode = BinMode::binary;
      } else {
        throw ConfigError("bin_mode must be count or binary", line);
      }
    } else if (key == "train_frac") {
      tr.train_frac = double_v();
    } else if (key == "split_seed") {
      tr.split_seed = parse_number<std::uint64_t>(value, line, key);
    } else {
      throw ConfigError("unknown key '" + key + "'", line);
    }
  }

  if (net.timesteps == 0) throw ConfigError("timesteps must be >= 1", 0);
  if (net.layers.empty()) throw ConfigError("at least one conv layer is required", 0);
  if (net.num_classes < 2) throw ConfigError("classes must be >= 2", 0);
  try {
    net.lif.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), 0);
  }
  if (tr.batch_size == 0) throw ConfigError("batch_size must be >= 1", 0);
  if (!(tr.learning_rate > 0)) throw ConfigError("learning_rate must be positive", 0);
  if (!(tr.dt_ms > 0)) throw ConfigError("dt_ms must be positive", 0);
  if (!(tr.train_frac > 0 && tr.train_frac < 1)) throw ConfigError("train_frac must lie in (0,1)", 0);
  return cfg;
}

RunConfig parse_run_config(const std::string& text) {
  std::istringstream is(text);
  return parse_run_config(is);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string(), 0);
  return parse_run_config(in);
}

std::string to_config_text(const RunConfig& cfg) {
  const NetworkConfig& n = cfg.network;
  const TrainConfig& t = cfg.train;
  std::ostringstream os;
  os << "timesteps = " << n.timesteps << '\n';
  os << "input = " << n.in_channels << ' ' << n.in_height << ' ' << n.in_width << '\n';
  for (const auto& l : n.layers) {
    os << "conv = " << l.out_channels << ' ' << l.kernel << ' ' << l.stride << ' ' << l.pad << ' '
       << (l.pool == PoolKind::max ? "max" : "avg") << ' ' << l.pool_window << '\n';
  }
  os << "classes = " << n.num_classes << '\n';
  os << "v_th = " << num(n.lif.v_th) << '\n';
  os << "v_reset = " << num(n.lif.v_reset) << '\n';
  os << "beta = " << num(n.lif.beta) << '\n';
  os << "surrogate_width = " << num(n.lif.surrogate_width) << '\n';
  os << "fire = " << (n.lif.fire == FireMode::heaviside ? "heaviside" : "relaxed") << '\n';
  os << "asa = " << asa_mode_string(n) << '\n';
  os << "asa_reduction = " << n.asa_reduction << '\n';
  os << "asa_k = " << n.asa_k << '\n';
  os << "bn_momentum = " << num(n.bn_momentum) << '\n';
  os << "bn_eps = " << num(n.bn_eps) << '\n';
  os << "epochs = " << t.epochs << '\n';
  os << "batch_size = " << t.batch_size << '\n';
  os << "learning_rate = " << num(t.learning_rate) << '\n';
  os << "optimizer = " << (t.optimizer == OptimizerKind::adam ? "adam" : "sgd_momentum") << '\n';
  os << "momentum = " << num(t.momentum) << '\n';
  os << "grad_clip = " << (t.grad_clip ? num(*t.grad_clip) : std::string("none")) << '\n';
  os << "seed = " << t.seed << '\n';
  os << "dt_ms = " << num(t.dt_ms) << '\n';
  os << "bin_mode = " << (t.bin_mode == BinMode::count ? "count" : "binary") << '\n';
  os << "train_frac = " << num(t.train_frac) << '\n';
  os << "split_seed = " << t.split_seed << '\n';
  return os.str();
}

std::uint64_t config_hash(const RunConfig& cfg) {
  const std::string text = to_config_text(cfg);
  return fnv1a(text.data(), text.size());
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
