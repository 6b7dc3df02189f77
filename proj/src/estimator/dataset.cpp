#include "legsafe/estimator/dataset.hpp"

#include "legsafe/sim/scenario.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>

namespace legsafe::estimator {

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s) out.push_back(i);
  }
  return out;
}

void Dataset::validate() const {
  spec.validate();
  const std::size_t n = windows.size();
  if (labels.size() != n || split.size() != n || run_id.size() != n) {
    throw std::invalid_argument("dataset arrays have inconsistent lengths");
  }
  std::map<int, Split> run_split;
  for (std::size_t i = 0; i < n; ++i) {
    if (windows[i].rows() != spec.timesteps || windows[i].cols() != spec.features()) {
      throw std::invalid_argument("dataset window has the wrong shape");
    }
    if (labels[i] < mu_min - 1e-6 || labels[i] > mu_max + 1e-6) {
      throw std::invalid_argument("dataset label outside the generation range");
    }
    const auto [it, inserted] = run_split.emplace(run_id[i], split[i]);
    if (!inserted && it->second != split[i]) throw std::invalid_argument("a run spans several splits");
  }
}

namespace {

constexpr std::array<char, 4> kDatasetMagic{'L', 'S', 'D', 'S'};
constexpr std::array<char, 4> kCheckpointMagic{'L', 'S', 'C', 'K'};

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw FormatError("cannot open " + path + " for writing");
  }
  template <typename T>
  void put(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void finish(const std::string& path) {
    out_.flush();
    if (!out_) throw FormatError("failed writing " + path);
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw FormatError("cannot open " + path);
  }
  template <typename T>
  T get() {
    T v{};
    bytes(&v, sizeof(T));
    return v;
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError(path_ + ": truncated file");
  }
  std::string string(std::uint32_t max_len = 1u << 20) {
    const auto n = get<std::uint32_t>();
    if (n > max_len) throw FormatError(path_ + ": string length out of range");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  void header(const std::array<char, 4>& magic, std::uint8_t version) {
    std::array<char, 4> m{};
    bytes(m.data(), 4);
    if (m != magic) throw FormatError(path_ + ": wrong file type");
    const auto v = get<std::uint8_t>();
    if (v != version) throw FormatError(fmt::format("{}: unsupported format version {}", path_, v));
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) throw FormatError(path_ + ": trailing bytes");
  }

 private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace

void save_dataset(const std::string& path, const Dataset& data) {
  data.validate();
  Writer w(path);
  w.bytes(kDatasetMagic.data(), 4);
  w.put(kDatasetFormatVersion);
  w.put(static_cast<std::uint32_t>(data.size()));
  w.put(static_cast<std::uint32_t>(data.spec.timesteps));
  w.put(static_cast<std::uint32_t>(data.spec.num_joints));
  w.put(data.spec.dt);
  w.put(data.mu_min);
  w.put(data.mu_max);
  w.put(data.seed);
  w.string(data.metadata);
  std::vector<float> buf(static_cast<std::size_t>(data.spec.timesteps * data.spec.features()));
  for (const auto& win : data.windows) {
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < win.rows(); ++r) {
      for (Eigen::Index c = 0; c < win.cols(); ++c) buf[k++] = static_cast<float>(win(r, c));
    }
    w.bytes(buf.data(), buf.size() * sizeof(float));
  }
  for (double l : data.labels) w.put(static_cast<float>(l));
  for (Split s : data.split) w.put(static_cast<std::uint8_t>(s));
  for (int r : data.run_id) w.put(static_cast<std::int32_t>(r));
  w.finish(path);
}

Dataset load_dataset(const std::string& path) {
  Reader r(path);
  r.header(kDatasetMagic, kDatasetFormatVersion);
  Dataset d;
  const auto n = r.get<std::uint32_t>();
  d.spec.timesteps = static_cast<int>(r.get<std::uint32_t>());
  d.spec.num_joints = static_cast<int>(r.get<std::uint32_t>());
  d.spec.dt = r.get<double>();
  d.mu_min = r.get<double>();
  d.mu_max = r.get<double>();
  d.seed = r.get<std::uint64_t>();
  d.metadata = r.string();
  if (d.spec.timesteps <= 0 || d.spec.timesteps > 100000 || d.spec.num_joints <= 0 || d.spec.num_joints > 1000) {
    throw FormatError(path + ": window dimensions out of range");
  }
  std::vector<float> buf(static_cast<std::size_t>(d.spec.timesteps * d.spec.features()));
  for (std::uint32_t i = 0; i < n; ++i) {
    r.bytes(buf.data(), buf.size() * sizeof(float));
    Eigen::MatrixXd win(d.spec.timesteps, d.spec.features());
    std::size_t k = 0;
    for (Eigen::Index row = 0; row < win.rows(); ++row) {
      for (Eigen::Index c = 0; c < win.cols(); ++c) win(row, c) = buf[k++];
    }
    d.windows.push_back(std::move(win));
  }
  for (std::uint32_t i = 0; i < n; ++i) d.labels.push_back(r.get<float>());
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto s = r.get<std::uint8_t>();
    if (s > 2) throw FormatError(path + ": invalid split tag");
    d.split.push_back(static_cast<Split>(s));
  }
  for (std::uint32_t i = 0; i < n; ++i) d.run_id.push_back(r.get<std::int32_t>());
  r.expect_end();
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(path + ": " + e.what());
  }
  return d;
}

void GenerationConfig::validate() const {
  if (samples <= 0 || windows_per_run <= 0) throw std::invalid_argument("sample counts must be positive");
  if (!(mu_min > 0.0 && mu_max >= mu_min)) throw std::invalid_argument("mu range must satisfy 0 < min <= max");
  if (!(warmup >= 0.0)) throw std::invalid_argument("warmup must be >= 0");
  if (!(val_fraction >= 0.0 && test_fraction >= 0.0 && val_fraction + test_fraction < 1.0)) {
    throw std::invalid_argument("split fractions must be >= 0 and leave room for training");
  }
  if (!(velocity_max >= velocity_min)) throw std::invalid_argument("velocity range is reversed");
}

Dataset generate_dataset(const model::RobotModel& model, const GenerationConfig& cfg,
                         const gait::TrotConfig& base_gait, const sim::SimConfig& sim_config,
                         const WindowSpec& spec, const std::function<void(int, int)>& progress) {
  cfg.validate();
  spec.validate();
  if (spec.num_joints != model.nva()) throw std::invalid_argument("window joint count must match the model");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> mu_dist(cfg.mu_min, cfg.mu_max);
  std::uniform_real_distribution<double> vel_dist(cfg.velocity_min, cfg.velocity_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Dataset d;
  d.spec = spec;
  d.mu_min = cfg.mu_min;
  d.mu_max = cfg.mu_max;
  d.seed = cfg.seed;
  d.metadata = fmt::format(
      "generator=trot\nwindows_per_run={}\nwarmup={}\nvelocity_min={}\nvelocity_max={}\nstance_splay={}\n"
      "joint_noise={}\nsim_dt={}\n",
      cfg.windows_per_run, cfg.warmup, cfg.velocity_min, cfg.velocity_max, cfg.stance_splay, cfg.joint_noise,
      sim_config.dt);

  int run = 0;
  // Bounded so a configuration where every run falls cannot loop forever.
  const int max_runs = 4 * (cfg.samples / cfg.windows_per_run + 1) + 16;
  while (static_cast<int>(d.size()) < cfg.samples) {
    if (run >= max_runs) throw std::runtime_error("dataset generation: too many failed runs");
    const double mu = mu_dist(rng);
    gait::TrotConfig gait_cfg = base_gait;
    gait_cfg.schedule.body_velocity_target = vel_dist(rng);
    gait_cfg.stance_splay = cfg.stance_splay;
    const double split_draw = unit(rng);
    const std::uint64_t run_seed = rng();
    const Split split = split_draw < cfg.test_fraction                      ? Split::kTest
                        : split_draw < cfg.test_fraction + cfg.val_fraction ? Split::kVal
                                                                             : Split::kTrain;

    gait::TrotController ctl(model, gait_cfg);
    sim::Terrain terrain;
    terrain.mu_true = mu;
    sim::ScenarioSettings settings;
    settings.duration = cfg.warmup + cfg.windows_per_run * spec.duration();
    settings.initial_joint_noise = cfg.joint_noise;
    settings.seed = run_seed;
    filter::FilterConfig fcfg;
    fcfg.gait_period = gait_cfg.schedule.gait_period;
    const auto log = sim::run_scenario(model, ctl, fcfg, terrain, sim_config, settings);

    for (int w = 0; w < cfg.windows_per_run && static_cast<int>(d.size()) < cfg.samples; ++w) {
      const double start = cfg.warmup + w * spec.duration();
      Eigen::MatrixXd win;
      try {
        win = tokenize(log, start, spec);
      } catch (const std::invalid_argument&) {
        break;  // the run ended early
      }
      // Round to the stored precision so generated and reloaded data agree.
      win = win.cast<float>().cast<double>();
      d.windows.push_back(std::move(win));
      d.labels.push_back(static_cast<double>(static_cast<float>(mu)));
      d.split.push_back(split);
      d.run_id.push_back(run);
    }
    ++run;
    if (progress) progress(static_cast<int>(d.size()), cfg.samples);
  }
  return d;
}

std::vector<Eigen::MatrixXd> make_tokens(const Dataset& data, const std::vector<std::size_t>& idx,
                                         const FeatureNormalizer& normalizer) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(to_tokens(normalizer.apply(data.windows.at(i)), data.spec.num_joints));
  return out;
}

std::vector<double> select_labels(const Dataset& data, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data.labels.at(i));
  return out;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  Writer w(path);
  w.bytes(kCheckpointMagic.data(), 4);
  w.put(kCheckpointFormatVersion);
  const auto& c = ck.network;
  for (int v : {c.d_in, c.d_model, c.heads, c.layers, c.k, c.seq_len, c.d_ff}) w.put(static_cast<std::int32_t>(v));
  w.put(c.ln_eps);
  w.put(static_cast<std::int32_t>(ck.spec.timesteps));
  w.put(static_cast<std::int32_t>(ck.spec.num_joints));
  w.put(ck.spec.dt);

  std::vector<std::pair<std::string, Eigen::MatrixXd>> named;
  named.emplace_back("norm.mean", ck.normalizer.mean);
  named.emplace_back("norm.std", ck.normalizer.stddev);
  for (const auto& e : ck.params.tensors()) named.emplace_back(e.name, *e.tensor);
  w.put(static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, m] : named) {
    w.string(name);
    w.put(static_cast<std::uint32_t>(m.rows()));
    w.put(static_cast<std::uint32_t>(m.cols()));
    w.bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  w.finish(path);
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  r.header(kCheckpointMagic, kCheckpointFormatVersion);
  Checkpoint ck;
  auto& c = ck.network;
  for (int* v : {&c.d_in, &c.d_model, &c.heads, &c.layers, &c.k, &c.seq_len, &c.d_ff}) *v = r.get<std::int32_t>();
  c.ln_eps = r.get<double>();
  ck.spec.timesteps = r.get<std::int32_t>();
  ck.spec.num_joints = r.get<std::int32_t>();
  ck.spec.dt = r.get<double>();
  try {
    c.validate();
    ck.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(path + ": " + e.what());
  }
  ck.params = zero_parameters(c);

  std::map<std::string, Eigen::MatrixXd> named;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.string(4096);
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (static_cast<std::uint64_t>(rows) * cols > (1ull << 28)) throw FormatError(path + ": tensor too large");
    Eigen::MatrixXd m(rows, cols);
    r.bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
    named.emplace(std::move(name), std::move(m));
  }
  r.expect_end();
  auto take = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    auto it = named.find(name);
    if (it == named.end()) throw FormatError(path + ": missing tensor " + name);
    if (it->second.rows() != rows || it->second.cols() != cols) throw FormatError(path + ": bad shape for " + name);
    Eigen::MatrixXd m = std::move(it->second);
    named.erase(it);
    return m;
  };
  ck.normalizer.mean = take("norm.mean", ck.spec.features(), 1);
  ck.normalizer.stddev = take("norm.std", ck.spec.features(), 1);
  for (auto& e : ck.params.tensors()) *e.tensor = take(e.name, e.tensor->rows(), e.tensor->cols());
  if (!named.empty()) throw FormatError(path + ": unexpected tensor " + named.begin()->first);
  return ck;
}

}  // namespace legsafe::estimator
