#include "legsafe/filter/clearance.hpp"

#include <cmath>
#include <string>

namespace legsafe::filter {

PhaseState phase(double t, double gait_period) {
  if (!(gait_period > 0.0)) throw std::invalid_argument("gait period must be positive");
  PhaseState p;
  double r = std::fmod(t, gait_period);
  if (r < 0.0) r += gait_period;
  p.phi = r / gait_period;
  if (p.phi >= 1.0) p.phi = 0.0;
  p.phi_dot = 1.0 / gait_period;
  p.phi_ddot = 0.0;
  return p;
}

PolynomialProfile::PolynomialProfile(std::vector<double> coefficients)
    : coeffs_(std::move(coefficients)) {
  for (double c : coeffs_) {
    if (!std::isfinite(c)) throw std::invalid_argument("profile coefficients must be finite");
  }
}

PolynomialProfile PolynomialProfile::bump(double peak, double base) {
  // 16 s^2 (1 - s)^2 = 16 s^2 - 32 s^3 + 16 s^4
  return PolynomialProfile({base, 0.0, 16.0 * peak, -32.0 * peak, 16.0 * peak});
}

double PolynomialProfile::value(double s) const {
  double acc = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * s + *it;
  return acc;
}

double PolynomialProfile::derivative(double s) const {
  double acc = 0.0;
  for (std::size_t k = coeffs_.size(); k-- > 1;) acc = acc * s + static_cast<double>(k) * coeffs_[k];
  return acc;
}

double PolynomialProfile::second_derivative(double s) const {
  double acc = 0.0;
  for (std::size_t k = coeffs_.size(); k-- > 2;) {
    acc = acc * s + static_cast<double>(k * (k - 1)) * coeffs_[k];
  }
  return acc;
}

double FootClearance::local_phase(double phi) const {
  double offset = std::fmod(phi - window_start, 1.0);
  if (offset < 0.0) offset += 1.0;
  if (offset >= window_length) return -1.0;
  return offset / window_length;
}

ClearanceSample FootClearance::evaluate(double phi) const {
  ClearanceSample out;
  const double s = local_phase(phi);
  if (s < 0.0) {
    out.z = terrain_height;
    return out;
  }
  out.in_window = true;
  out.z = profile.value(s);
  out.dz = profile.derivative(s) / window_length;
  out.ddz = profile.second_derivative(s) / (window_length * window_length);
  return out;
}

}  // namespace legsafe::filter
