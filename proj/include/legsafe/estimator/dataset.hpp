#pragma once

#include "legsafe/estimator/network.hpp"
#include "legsafe/estimator/tokens.hpp"
#include "legsafe/gait/trot.hpp"
#include "legsafe/model/robot_model.hpp"
#include "legsafe/sim/simulator.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace legsafe::estimator {

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  WindowSpec spec;
  double mu_min = 0.2;
  double mu_max = 1.0;
  std::uint64_t seed = 0;
  /// Free-form key=value lines describing the generator settings.
  std::string metadata;
  /// Raw windows (timesteps x 3J), values rounded to float precision.
  std::vector<Eigen::MatrixXd> windows;
  std::vector<double> labels;
  std::vector<Split> split;
  /// Windows cut from one simulated run share its id and its split.
  std::vector<int> run_id;

  std::size_t size() const { return windows.size(); }
  std::vector<std::size_t> indices(Split s) const;
  void validate() const;
};

inline constexpr std::uint8_t kDatasetFormatVersion = 1;
inline constexpr std::uint8_t kCheckpointFormatVersion = 1;

void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

struct GenerationConfig {
  int samples = 512;
  double mu_min = 0.2;
  double mu_max = 1.0;
  int windows_per_run = 4;
  /// Settling time discarded at the start of each run, s.
  double warmup = 0.6;
  double val_fraction = 0.15;
  double test_fraction = 0.15;
  std::uint64_t seed = 1;
  /// Per-run gait randomization around the base trot configuration.
  double velocity_min = 0.1;
  double velocity_max = 0.3;
  double stance_splay = 0.04;
  double joint_noise = 0.02;

  void validate() const;
};

/// Runs trot scenarios over mu_true ~ U[mu_min, mu_max] and slices
/// consecutive windows after the warmup. Runs are assigned to splits as a
/// whole. `progress` receives (samples so far, target).
Dataset generate_dataset(const model::RobotModel& model, const GenerationConfig& config,
                         const gait::TrotConfig& base_gait, const sim::SimConfig& sim_config,
                         const WindowSpec& spec = {},
                         const std::function<void(int, int)>& progress = nullptr);

/// Normalized token matrices for the given dataset indices.
std::vector<Eigen::MatrixXd> make_tokens(const Dataset& data, const std::vector<std::size_t>& idx,
                                         const FeatureNormalizer& normalizer);
std::vector<double> select_labels(const Dataset& data, const std::vector<std::size_t>& idx);

struct Checkpoint {
  NetworkConfig network;
  WindowSpec spec;
  FeatureNormalizer normalizer;
  Parameters params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace legsafe::estimator
