#include "legsafe/estimator/training.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

namespace legsafe::estimator {

void TrainConfig::validate() const {
  if (epochs <= 0 || batch_size <= 0) throw std::invalid_argument("epochs and batch size must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(final_lr_fraction >= 0.0 && final_lr_fraction <= 1.0)) {
    throw std::invalid_argument("final learning-rate fraction must lie in [0, 1]");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw std::invalid_argument("Adam epsilon must be positive");
}

Adam::Adam(const Parameters& like, const TrainConfig& config)
    : cfg_(config), m_(like.zeros_like()), v_(like.zeros_like()) {}

void Adam::step(Parameters& params, const Parameters& grad, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto p = params.tensors();
  const auto g = grad.tensors();
  auto m = m_.tensors();
  auto v = v_.tensors();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i].tensor->array() = cfg_.beta1 * m[i].tensor->array() + (1.0 - cfg_.beta1) * g[i].tensor->array();
    v[i].tensor->array() = cfg_.beta2 * v[i].tensor->array() + (1.0 - cfg_.beta2) * g[i].tensor->array().square();
    p[i].tensor->array() -=
        lr * (m[i].tensor->array() / bc1) / ((v[i].tensor->array() / bc2).sqrt() + cfg_.adam_eps);
  }
}

EvalMetrics evaluate(const Parameters& params, const NetworkConfig& network, const std::vector<Eigen::MatrixXd>& x,
                     const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("inputs and labels differ in length");
  EvalMetrics out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = forward(params, network, x[i]);
    out.predictions.push_back(p);
    out.mse += (p - y[i]) * (p - y[i]);
    out.mae += std::abs(p - y[i]);
  }
  if (!x.empty()) {
    out.mse /= static_cast<double>(x.size());
    out.mae /= static_cast<double>(x.size());
  }
  return out;
}

double constant_baseline_mae(const std::vector<double>& labels, double constant) {
  if (labels.empty()) return 0.0;
  double s = 0.0;
  for (double l : labels) s += std::abs(l - constant);
  return s / static_cast<double>(labels.size());
}

TrainResult train(const NetworkConfig& network, Parameters init, const std::vector<Eigen::MatrixXd>& train_x,
                  const std::vector<double>& train_y, const std::vector<Eigen::MatrixXd>& val_x,
                  const std::vector<double>& val_y, const TrainConfig& config,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  config.validate();
  if (train_x.empty() || train_x.size() != train_y.size()) {
    throw std::invalid_argument("training data must be non-empty with one label per sample");
  }
  TrainResult res;
  res.params = std::move(init);
  Adam opt(res.params, config);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const auto batch = static_cast<std::size_t>(config.batch_size);
  const long per_epoch = static_cast<long>((train_x.size() + batch - 1) / batch);
  long total = per_epoch * config.epochs;
  if (config.max_steps > 0) total = std::min(total, config.max_steps);
  double best_val = std::numeric_limits<double>::infinity();
  Parameters best = res.params;

  for (int epoch = 0; epoch < config.epochs && opt.steps() < total; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochMetrics em;
    em.epoch = epoch;
    double se = 0.0;
    double ae = 0.0;
    std::size_t seen = 0;
    for (std::size_t b0 = 0; b0 < order.size() && opt.steps() < total; b0 += batch) {
      std::vector<const Eigen::MatrixXd*> xs;
      std::vector<double> ys;
      for (std::size_t i = b0; i < std::min(order.size(), b0 + batch); ++i) {
        xs.push_back(&train_x[order[i]]);
        ys.push_back(train_y[order[i]]);
      }
      auto lg = loss_and_gradients(res.params, network, xs, ys);
      for (std::size_t i = 0; i < ys.size(); ++i) {
        se += (lg.predictions[i] - ys[i]) * (lg.predictions[i] - ys[i]);
        ae += std::abs(lg.predictions[i] - ys[i]);
      }
      seen += ys.size();
      if (config.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& e : lg.grad.tensors()) sq += e.tensor->squaredNorm();
        const double norm = std::sqrt(sq);
        if (norm > config.clip_norm) {
          for (auto& e : lg.grad.tensors()) *e.tensor *= config.clip_norm / norm;
        }
      }
      const double progress = total > 1 ? static_cast<double>(opt.steps()) / static_cast<double>(total - 1) : 1.0;
      const double lr = config.learning_rate *
                        (config.final_lr_fraction + (1.0 - config.final_lr_fraction) * 0.5 * (1.0 + std::cos(M_PI * progress)));
      em.learning_rate = lr;
      opt.step(res.params, lg.grad, lr);
    }
    if (!res.params.all_finite()) throw std::runtime_error("training diverged: non-finite parameters");
    em.step = opt.steps();
    em.train_mse = se / static_cast<double>(seen);
    em.train_mae = ae / static_cast<double>(seen);
    if (!val_x.empty()) {
      const auto ev = evaluate(res.params, network, val_x, val_y);
      em.val_mse = ev.mse;
      em.val_mae = ev.mae;
    } else {
      em.val_mse = em.val_mae = std::numeric_limits<double>::quiet_NaN();
    }
    const double score = val_x.empty() ? em.train_mse : em.val_mse;
    if (score < best_val) {
      best_val = score;
      best = res.params;
      res.best_epoch = epoch;
    }
    res.history.push_back(em);
    if (on_epoch) on_epoch(em);
  }
  if (config.keep_best && res.best_epoch >= 0) res.params = std::move(best);
  res.steps = opt.steps();
  return res;
}

void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& history) {
  out << "epoch,step,learning_rate,train_mse,train_mae,val_mse,val_mae\n";
  for (const auto& m : history) {
    out << fmt::format("{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", m.epoch, m.step, m.learning_rate, m.train_mse,
                       m.train_mae, m.val_mse, m.val_mae);
  }
}

}  // namespace legsafe::estimator
