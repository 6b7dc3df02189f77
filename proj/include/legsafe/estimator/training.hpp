#pragma once

#include "legsafe/estimator/network.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace legsafe::estimator {

struct TrainConfig {
  int epochs = 40;
  int batch_size = 16;
  /// Stops after this many optimizer steps when positive.
  long max_steps = -1;
  double learning_rate = 1e-3;
  /// Cosine decay from learning_rate down to this fraction of it.
  double final_lr_fraction = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Global gradient norm clip; non-positive disables clipping.
  double clip_norm = 1.0;
  /// Keep the parameters of the epoch with the lowest validation MSE.
  bool keep_best = true;
  std::uint64_t seed = 1;

  void validate() const;
};

class Adam {
 public:
  Adam(const Parameters& like, const TrainConfig& config);
  void step(Parameters& params, const Parameters& grad, double learning_rate);
  long steps() const { return t_; }

 private:
  TrainConfig cfg_;
  Parameters m_;
  Parameters v_;
  long t_ = 0;
};

struct EpochMetrics {
  int epoch = 0;
  long step = 0;
  double learning_rate = 0.0;
  double train_mse = 0.0;
  double train_mae = 0.0;
  double val_mse = 0.0;
  double val_mae = 0.0;
};

struct TrainResult {
  Parameters params;
  std::vector<EpochMetrics> history;
  int best_epoch = -1;
  long steps = 0;
};

/// Minibatch Adam on the mean squared error. Train metrics are the running
/// minibatch values of each epoch; validation metrics are evaluated at the
/// end of it (NaN when there is no validation data).
TrainResult train(const NetworkConfig& network, Parameters init, const std::vector<Eigen::MatrixXd>& train_x,
                  const std::vector<double>& train_y, const std::vector<Eigen::MatrixXd>& val_x,
                  const std::vector<double>& val_y, const TrainConfig& config,
                  const std::function<void(const EpochMetrics&)>& on_epoch = nullptr);

struct EvalMetrics {
  double mse = 0.0;
  double mae = 0.0;
  std::vector<double> predictions;
};

EvalMetrics evaluate(const Parameters& params, const NetworkConfig& network,
                     const std::vector<Eigen::MatrixXd>& x, const std::vector<double>& y);

/// Mean absolute error of predicting `constant` for every label.
double constant_baseline_mae(const std::vector<double>& labels, double constant);

void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& history);

}  // namespace legsafe::estimator
