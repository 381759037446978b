// Copyright 2026 The DAF Navigation Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DAF_CONTROL_HPP_
#define DAF_CONTROL_HPP_

#include <cmath>
#include <limits>
#include <utility>

#include "daf/geometry.hpp"
#include "daf/types.hpp"

namespace daf {

/// Cubic blend used by gamma on [eps1, eps2):
///   phi(z) = a + b s + c s^2 + d s^3,  s = z - eps1,  e = 1 / (eps2 - eps1),
/// matching value and slope of 1/z at eps1 and of 0 at eps2.
struct SplinePhi {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d_coef = 0.0;
  double e = 0.0;
  double eps1 = 0.0;
  double eps2 = 0.0;

  double operator()(double z) const {
    const double s = z - eps1;
    return a + s * (b + s * (c + s * d_coef));
  }
  double derivative(double z) const {
    const double s = z - eps1;
    return b + s * (2.0 * c + 3.0 * s * d_coef);
  }
};

/// Rejects eps2 > 4 eps1: past that point the blend dips below zero before
/// reaching eps2 and the avoidance dissipation would change sign.
inline SplinePhi build_phi(double eps1, double eps2) {
  require(eps1 > 0.0 && std::isfinite(eps1), "eps1 must be positive");
  require(eps2 > eps1 && std::isfinite(eps2), "eps1 must be smaller than eps2");
  require(eps2 <= 4.0 * eps1, "eps2 must not exceed 4*eps1 (gamma would turn negative)");
  SplinePhi phi;
  phi.eps1 = eps1;
  phi.eps2 = eps2;
  phi.e = 1.0 / (eps2 - eps1);
  phi.a = 1.0 / eps1;
  phi.b = -phi.a * phi.a;
  phi.c = 2.0 * phi.a * phi.a * phi.e - 3.0 * phi.a * phi.e * phi.e;
  phi.d_coef = 2.0 * phi.a * phi.e * phi.e * phi.e - phi.a * phi.a * phi.e * phi.e;
  return phi;
}

/// Avoidance gain profile: 1/z below eps1, the cubic blend up to eps2, zero
/// beyond. Continuously differentiable on (0, inf).
inline double gamma(double z, const SplinePhi& phi) {
  if (!(z > 0.0)) throw SafetyViolation("gamma evaluated at non-positive clearance", z);
  if (z < phi.eps1) return 1.0 / z;
  if (z < phi.eps2) return phi(z);
  return 0.0;
}

/// d gamma / dz, with the same branches as gamma.
inline double gamma_derivative(double z, const SplinePhi& phi) {
  if (!(z > 0.0)) throw SafetyViolation("gamma evaluated at non-positive clearance", z);
  if (z < phi.eps1) return -1.0 / (z * z);
  if (z < phi.eps2) return phi.derivative(z);
  return 0.0;
}

struct DafParams {
  double k1 = 10.0;
  double k2 = 5.0;
  double k3 = 10.0;
  double eps1 = 0.5;
  double eps2 = 1.4;
  Vector target;

  void validate() const {
    require(k1 > 0.0 && k2 > 0.0 && k3 > 0.0, "DAF gains must be positive");
    require(target.size() >= 2 && all_finite(target), "DAF target must be a finite vector");
    build_phi(eps1, eps2);
  }
  SplinePhi phi() const { return build_phi(eps1, eps2); }
};

struct ApfParams {
  double ka = 10.0;
  double kv = 5.0;
  double kr = 400.0;
  double eps2 = 1.4;
  Vector target;

  void validate() const {
    require(ka > 0.0 && kv > 0.0 && kr > 0.0, "APF gains must be positive");
    require(eps2 > 0.0, "APF eps2 must be positive");
    require(target.size() >= 2 && all_finite(target), "APF target must be a finite vector");
  }
};

/// What a controller needs to know about the obstacles: the clearance
/// margin d = d0 - epsilon and the unit normal. An infinite d means nothing
/// was sensed.
struct Proximity {
  double d = std::numeric_limits<double>::infinity();
  Vector eta;

  static Proximity from(const DistanceQuery& q) { return {q.d, q.eta}; }
};

/// u = -k1 (p - p_d) - k2 v - k3 gamma(d) eta eta^T v
inline Vector daf_control(const Vector& p, const Vector& v, const Proximity& q,
                          const DafParams& params, const SplinePhi& phi) {
  if (!(q.d > 0.0)) throw SafetyViolation("DAF evaluated with non-positive clearance", q.d);
  Vector u = -params.k1 * (p - params.target) - params.k2 * v;
  const double g = gamma(q.d, phi);
  if (g != 0.0) u -= (params.k3 * g * q.eta.dot(v)) * q.eta;
  return u;
}

inline Vector daf_control(const Vector& p, const Vector& v, const Proximity& q,
                          const DafParams& params) {
  return daf_control(p, v, q, params, params.phi());
}

/// Repulsive force of the potential-field baseline, k_r applied once.
inline Vector apf_repulsion(const Proximity& q, const ApfParams& params) {
  if (!(q.d > 0.0)) throw SafetyViolation("APF evaluated with non-positive clearance", q.d);
  if (q.d > params.eps2) return Vector::Zero(q.eta.size());
  return (params.kr / (q.d * q.d) * (1.0 / q.d - 1.0 / params.eps2)) * q.eta;
}

inline Vector apf_control(const Vector& p, const Vector& v, const Proximity& q,
                          const ApfParams& params) {
  if (!(q.d > 0.0)) throw SafetyViolation("APF evaluated with non-positive clearance", q.d);
  Vector u = -params.ka * (p - params.target) - params.kv * v;
  if (q.d <= params.eps2) u += apf_repulsion(q, params);
  return u;
}

/// Rayleigh dissipation split into the stabilizing and avoidance parts.
inline std::pair<double, double> dissipation(const Vector& v, const Proximity& q,
                                             const DafParams& params) {
  if (!(q.d > 0.0)) throw SafetyViolation("dissipation evaluated with non-positive clearance", q.d);
  const double ds = 0.5 * params.k2 * v.squaredNorm();
  const double g = gamma(q.d, params.phi());
  const double normal_speed = g != 0.0 ? q.eta.dot(v) : 0.0;
  const double da = 0.5 * params.k3 * g * normal_speed * normal_speed;
  return {ds, da};
}

/// L = k1 |p - p_d|^2 / 2 + |v|^2 / 2
inline double lyapunov(const Vector& p, const Vector& v, const DafParams& params) {
  return 0.5 * params.k1 * (p - params.target).squaredNorm() + 0.5 * v.squaredNorm();
}

}  // namespace daf

#endif  // DAF_CONTROL_HPP_
