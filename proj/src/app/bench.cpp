#include "legsafe/app/bench.hpp"

#include "legsafe/app/experiments.hpp"
#include "legsafe/estimator/network.hpp"
#include "legsafe/model/dynamics.hpp"
#include "legsafe/model/model_io.hpp"
#include "legsafe/sim/simulator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <numeric>
#include <ostream>
#include <random>

namespace legsafe::app {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

model::RobotState random_state(const model::RobotModel& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  model::RobotState s = model::neutral_state(m);
  for (Eigen::Index i = 0; i < s.q.size(); ++i) s.q[i] += 0.5 * u(rng);
  if (m.floating_base()) s.q.segment<4>(3).normalize();
  for (Eigen::Index i = 0; i < s.v.size(); ++i) s.v[i] = u(rng);
  return s;
}

}  // namespace

TimingStats summarize(std::vector<double> seconds) {
  TimingStats t;
  if (seconds.empty()) return t;
  std::sort(seconds.begin(), seconds.end());
  const auto at = [&](double q) {
    return seconds[static_cast<std::size_t>(std::min<double>(seconds.size() - 1, q * (seconds.size() - 1) + 0.5))];
  };
  t.samples = static_cast<int>(seconds.size());
  t.min = seconds.front();
  t.max = seconds.back();
  t.median = at(0.5);
  t.p95 = at(0.95);
  t.mean = std::accumulate(seconds.begin(), seconds.end(), 0.0) / seconds.size();
  return t;
}

BenchRow bench_filter_qp(const ScenarioSpec& spec, int control_steps) {
  const Setup setup = make_setup(spec);
  const gait::TrotController controller(setup.model, setup.gait);
  model::RobotState state = controller.standing_state(spec.terrain.height(0.0, 0.0));
  const int substeps = static_cast<int>(std::lround(spec.scenario.control_dt / spec.sim.dt));
  std::vector<double> times;
  long size = 0;
  for (int k = 0; k < control_steps; ++k) {
    state.t = k * spec.scenario.control_dt;
    const auto cmd = controller.command(state);
    const auto as = filter::assemble(setup.model, state, cmd.contacts, cmd.u, setup.filter);
    size = as.layout.size();
    const auto start = Clock::now();
    const auto sol = qp::solve(as.problem, setup.filter.qp);
    times.push_back(seconds_since(start));
    (void)sol;
    for (int s = 0; s < substeps; ++s) state = sim::step(setup.model, state, cmd.u, spec.terrain, spec.sim);
  }
  return {"filter_qp_solve", size, summarize(std::move(times))};
}

std::vector<BenchRow> bench_dynamics(const ScenarioSpec& spec, int reps) {
  const auto m = model::load_model(spec.model_path);
  std::mt19937_64 rng(spec.seed);
  std::vector<model::RobotState> states;
  for (int i = 0; i < reps; ++i) states.push_back(random_state(m, rng));
  std::vector<double> tm, th;
  double sink = 0.0;
  for (const auto& s : states) {
    auto start = Clock::now();
    sink += model::mass_matrix(m, s)(0, 0);
    tm.push_back(seconds_since(start));
    start = Clock::now();
    sink += model::nonlinear_effects(m, s)[0];
    th.push_back(seconds_since(start));
  }
  const long nv = m.nv();
  std::vector<BenchRow> rows{{"mass_matrix", nv, summarize(tm)}, {"nonlinear_effects", nv, summarize(th)}};
  if (!std::isfinite(sink)) rows.clear();
  return rows;
}

double time_attention(const estimator::NetworkConfig& network, int seq_len, int reps, std::uint64_t seed) {
  estimator::NetworkConfig cfg = network;
  cfg.seq_len = seq_len;
  cfg.validate();
  std::mt19937_64 rng(seed);
  const auto params = estimator::init_parameters(cfg, rng);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd x(seq_len, cfg.d_model);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  double best = std::numeric_limits<double>::infinity();
  double sink = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto start = Clock::now();
    const auto out = estimator::attention_forward(params.layers.front(), cfg, x);
    best = std::min(best, seconds_since(start));
    sink += out.output(0, 0);
  }
  return std::isfinite(sink) ? best : std::numeric_limits<double>::quiet_NaN();
}

std::vector<BenchRow> bench_attention(const ScenarioSpec& spec, const std::vector<int>& lengths, int reps) {
  std::vector<BenchRow> rows;
  for (int L : lengths) {
    const double t = time_attention(spec.estimator.network, L, reps, spec.seed);
    TimingStats s;
    s.samples = reps;
    s.min = s.median = s.p95 = s.max = s.mean = t;
    rows.push_back({"attention_best", L, s});
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "# " << kBenchSchema << " v" << kBenchSchemaVersion << "\n";
  out << "name,size,samples,min_s,median_s,p95_s,max_s,mean_s\n";
  for (const auto& r : rows) {
    const auto& s = r.stats;
    out << fmt::format("{},{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", r.name, r.size, s.samples, s.min, s.median,
                       s.p95, s.max, s.mean);
  }
}

}  // namespace legsafe::app
