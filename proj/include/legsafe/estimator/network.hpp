#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace legsafe::estimator {

struct NetworkConfig {
  int d_in = 3;
  int d_model = 32;
  int heads = 4;
  int layers = 2;
  /// Projected key/value length.
  int k = 32;
  /// Token count T * J.
  int seq_len = 480;
  int d_ff = 64;
  double ln_eps = 1e-5;

  void validate() const;
  int head_dim() const { return d_model / heads; }
};

struct LayerParams {
  Eigen::MatrixXd wq, wk, wv;  // d x d
  Eigen::MatrixXd e, f;        // k x L
  Eigen::MatrixXd wo;          // d x d
  Eigen::MatrixXd bo;          // d x 1
  Eigen::MatrixXd ln1_g, ln1_b;
  Eigen::MatrixXd w1;  // d_ff x d
  Eigen::MatrixXd c1;  // d_ff x 1
  Eigen::MatrixXd w2;  // d x d_ff
  Eigen::MatrixXd c2;  // d x 1
  Eigen::MatrixXd ln2_g, ln2_b;
};

/// Every tensor is stored as a matrix; vectors are single columns and the
/// head bias is 1 x 1. The same type holds gradients and optimizer moments.
struct Parameters {
  Eigen::MatrixXd w_in;  // d x d_in
  Eigen::MatrixXd b_in;  // d x 1
  Eigen::MatrixXd pos;   // L x d
  std::vector<LayerParams> layers;
  Eigen::MatrixXd head_w;  // d x 1
  Eigen::MatrixXd head_b;  // 1 x 1

  struct Entry {
    std::string name;
    Eigen::MatrixXd* tensor;
  };
  struct ConstEntry {
    std::string name;
    const Eigen::MatrixXd* tensor;
  };
  std::vector<Entry> tensors();
  std::vector<ConstEntry> tensors() const;

  /// Same shapes, all zeros.
  Parameters zeros_like() const;
  std::size_t size() const;
  bool all_finite() const;
};

Parameters zero_parameters(const NetworkConfig& config);
Parameters init_parameters(const NetworkConfig& config, std::mt19937_64& rng);

struct AttentionOutput {
  /// Concatenated head outputs before the output projection, L x d.
  Eigen::MatrixXd heads;
  /// Attention weights per head, L x k each.
  std::vector<Eigen::MatrixXd> weights;
  /// Block output after projection, residual and layer norm, L x d.
  Eigen::MatrixXd output;
};

/// softmax(Q (E K)' / sqrt(d_h)) (F V) per head, concatenated, projected,
/// added to the input and layer-normalized.
AttentionOutput attention_forward(const LayerParams& layer, const NetworkConfig& config,
                                  const Eigen::MatrixXd& x);

/// One encoder block: attention sublayer then feed-forward sublayer.
Eigen::MatrixXd block_forward(const LayerParams& layer, const NetworkConfig& config,
                              const Eigen::MatrixXd& x);

/// Prediction for one token matrix (L x d_in).
double forward(const Parameters& params, const NetworkConfig& config, const Eigen::MatrixXd& tokens);

struct LossAndGradients {
  double loss = 0.0;
  Parameters grad;
  std::vector<double> predictions;
};

/// Mean squared error over the batch and its gradient for every parameter.
LossAndGradients loss_and_gradients(const Parameters& params, const NetworkConfig& config,
                                    const std::vector<const Eigen::MatrixXd*>& batch,
                                    const std::vector<double>& labels);

}  // namespace legsafe::estimator
