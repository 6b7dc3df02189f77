#pragma once

#include "legsafe/app/config.hpp"

#include <iosfwd>
#include <vector>

namespace legsafe::app {

struct TimingStats {
  int samples = 0;
  double min = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

TimingStats summarize(std::vector<double> seconds);

struct BenchRow {
  std::string name;
  long size = 0;
  TimingStats stats;
};

/// Cold QP solves of filter problems assembled along a nominal trot of
/// `control_steps` steps. `size` is the decision dimension.
BenchRow bench_filter_qp(const ScenarioSpec& spec, int control_steps);

/// Mass matrix and nonlinear effects on random states of the spec's model.
std::vector<BenchRow> bench_dynamics(const ScenarioSpec& spec, int reps);

/// Best-of-`reps` wall clock of one attention layer at sequence length L with
/// the spec's network width and projection size k.
double time_attention(const estimator::NetworkConfig& network, int seq_len, int reps, std::uint64_t seed);

std::vector<BenchRow> bench_attention(const ScenarioSpec& spec, const std::vector<int>& lengths, int reps);

inline constexpr const char* kBenchSchema = "legsafe-bench";
inline constexpr int kBenchSchemaVersion = 1;

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace legsafe::app
