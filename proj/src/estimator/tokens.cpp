#include "legsafe/estimator/tokens.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace legsafe::estimator {

void WindowSpec::validate() const {
  if (timesteps <= 0 || num_joints <= 0) throw std::invalid_argument("window dimensions must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("window dt must be positive");
}

Eigen::MatrixXd tokenize(const sim::TrajectoryLog& log, double start_time, const WindowSpec& spec) {
  spec.validate();
  if (log.num_joints != spec.num_joints) throw std::invalid_argument("log joint count does not match the window");
  const auto& steps = log.steps;
  if (steps.empty()) throw std::invalid_argument("empty trajectory log");
  const double spacing = steps.size() > 1 ? steps[1].t - steps[0].t : 0.0;
  const double tol = 1e-9;
  if (start_time < steps.front().t - tol) throw std::invalid_argument("window starts before the log");
  if (steps.back().t + spacing < start_time + spec.duration() - tol) {
    throw std::invalid_argument("log is shorter than the estimator window");
  }

  Eigen::MatrixXd out(spec.timesteps, spec.features());
  auto it = steps.begin();
  for (int i = 0; i < spec.timesteps; ++i) {
    const double target = start_time + i * spec.dt;
    it = std::lower_bound(it, steps.end(), target - tol,
                          [](const sim::StepRecord& r, double t) { return r.t < t; });
    if (it == steps.end()) throw std::invalid_argument("log is shorter than the estimator window");
    for (int j = 0; j < spec.num_joints; ++j) {
      out(i, 3 * j) = it->q[j];
      out(i, 3 * j + 1) = it->qd[j];
      out(i, 3 * j + 2) = it->u_applied[j];
    }
  }
  return out;
}

FeatureNormalizer FeatureNormalizer::fit(const std::vector<const Eigen::MatrixXd*>& windows) {
  if (windows.empty()) throw std::invalid_argument("cannot fit a normalizer without windows");
  const Eigen::Index f = windows.front()->cols();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(f);
  double n = 0.0;
  for (const auto* w : windows) {
    if (w->cols() != f) throw std::invalid_argument("windows have inconsistent feature counts");
    sum += w->colwise().sum().transpose();
    n += static_cast<double>(w->rows());
  }
  FeatureNormalizer out;
  out.mean = sum / n;
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(f);
  for (const auto* w : windows) {
    sq += (w->rowwise() - out.mean.transpose()).colwise().squaredNorm().transpose();
  }
  out.stddev = (sq / n).cwiseSqrt().cwiseMax(kStdFloor);
  return out;
}

Eigen::MatrixXd FeatureNormalizer::apply(const Eigen::MatrixXd& raw) const {
  if (raw.cols() != mean.size()) throw std::invalid_argument("normalizer feature count mismatch");
  Eigen::MatrixXd out = (raw.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array();
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    if (stddev[c] <= kStdFloor) out.col(c).setZero();
  }
  return out;
}

Eigen::MatrixXd to_tokens(const Eigen::MatrixXd& window, int num_joints) {
  if (num_joints <= 0 || window.cols() != 3 * num_joints) throw std::invalid_argument("window is not 3 J wide");
  Eigen::MatrixXd out(window.rows() * num_joints, 3);
  for (Eigen::Index t = 0; t < window.rows(); ++t) {
    for (int j = 0; j < num_joints; ++j) out.row(t * num_joints + j) = window.block(t, 3 * j, 1, 3);
  }
  return out;
}

}  // namespace legsafe::estimator
