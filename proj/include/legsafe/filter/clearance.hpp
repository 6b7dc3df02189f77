#pragma once

#include <stdexcept>
#include <vector>

namespace legsafe::filter {

/// Gait phase and its time derivatives. phi_ddot is identically zero.
struct PhaseState {
  double phi = 0.0;
  double phi_dot = 0.0;
  double phi_ddot = 0.0;
};

/// phi = (t mod period) / period, phi_dot = 1 / period.
PhaseState phase(double t, double gait_period);

/// Polynomial in the local swing phase s in [0, 1], coefficients in
/// ascending order: z(s) = sum_k coeffs[k] s^k.
class PolynomialProfile {
 public:
  PolynomialProfile() = default;
  explicit PolynomialProfile(std::vector<double> coefficients);

  /// 16 peak s^2 (1 - s)^2 + base: a single bump of height `peak` above
  /// `base`, flat at both ends.
  static PolynomialProfile bump(double peak, double base = 0.0);

  double value(double s) const;
  double derivative(double s) const;
  double second_derivative(double s) const;
  const std::vector<double>& coefficients() const { return coeffs_; }

 private:
  std::vector<double> coeffs_;
};

/// Desired clearance height and its phase derivatives at one phi.
struct ClearanceSample {
  double z = 0.0;
  double dz = 0.0;   // dz / dphi
  double ddz = 0.0;  // d2z / dphi2
  bool in_window = false;
};

/// World-frame clearance profile z(phi) for one foot. Inside the swing window
/// [start, start + length) (taken modulo 1) phi is remapped affinely onto
/// s in [0, 1] and the polynomial applies; outside it z is the terrain height
/// with zero derivatives.
struct FootClearance {
  double window_start = 0.0;
  double window_length = 0.5;
  PolynomialProfile profile;
  double terrain_height = 0.0;

  ClearanceSample evaluate(double phi) const;
  /// Local swing phase in [0, 1] or a negative value outside the window.
  double local_phase(double phi) const;
};

}  // namespace legsafe::filter
