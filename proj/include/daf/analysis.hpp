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

#ifndef DAF_ANALYSIS_HPP_
#define DAF_ANALYSIS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "daf/control.hpp"
#include "daf/geometry.hpp"
#include "daf/simulation.hpp"
#include "daf/types.hpp"

namespace daf {

/// An undesired equilibrium: a point p* of the eroded boundary where the
/// target direction is aligned with the outward normal, p* - p_d = lambda eta.
struct EquilibriumReport {
  Vector p_star;
  double lambda = 0.0;              // |p* - p_d|
  Vector eta;                       // normal at p*
  std::vector<double> eigenvalues;  // of the distance Hessian at p*, ascending
  std::vector<Vector> principal_dirs;
  double condition_rhs = 0.0;       // min(1, k2/k1) / lambda
  bool unstable = false;            // max eigenvalue > condition_rhs
  double alpha_phi = 0.0;           // limit of gamma(d) d' while stalled: -lambda k1 / k3
  int obstacle = -1;
  double residual = 0.0;            // |(p* - p_d) - lambda eta|

  double max_eigenvalue() const { return eigenvalues.empty() ? 0.0 : eigenvalues.back(); }
  const Vector& max_direction() const { return principal_dirs.back(); }
};

/// True iff the largest principal curvature exceeds min(1, k2/k1) / lambda.
inline bool curvature_condition(const EquilibriumReport& rep, double k1, double k2) {
  return rep.max_eigenvalue() > std::min(1.0, k2 / k1) / rep.lambda;
}

namespace detail {

/// Fills the curvature and stability fields for a candidate. Returns false
/// when the candidate is not a regular point of the eroded boundary owned by
/// `obstacle`.
inline bool complete_report(const Environment& env, const DafParams& params, int obstacle,
                            const Vector& candidate, EquilibriumReport& rep) {
  if (!all_finite(candidate) || !env.in_workspace(candidate)) return false;
  const auto near = env.nearest(candidate);
  if (near.ambiguous || near.source != obstacle) return false;
  if (std::abs(near.d0 - env.epsilon()) > 1e-7 * std::max(1.0, env.epsilon())) return false;
  DistanceQuery q;
  try {
    q = query(env, candidate);
  } catch (const Error&) {
    return false;
  }
  const Vector r = candidate - params.target;
  rep.p_star = candidate;
  rep.lambda = r.norm();
  if (!(r.dot(q.eta) > 0.0)) return false;
  rep.eta = q.eta;
  rep.residual = (r - rep.lambda * q.eta).norm();
  if (rep.residual > 1e-6 * std::max(1.0, rep.lambda)) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (q.hessian + q.hessian.transpose()));
  rep.eigenvalues.clear();
  rep.principal_dirs.clear();
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    rep.eigenvalues.push_back(eig.eigenvalues()[i]);
    rep.principal_dirs.push_back(eig.eigenvectors().col(i));
  }
  rep.condition_rhs = std::min(1.0, params.k2 / params.k1) / rep.lambda;
  rep.unstable = curvature_condition(rep, params.k1, params.k2);
  rep.alpha_phi = -rep.lambda * params.k1 / params.k3;
  rep.obstacle = obstacle;
  return true;
}

// Bisection on a bracket [lo, hi] with f(lo), f(hi) of opposite sign,
// run until the interval cannot shrink further in floating point.
template <typename F>
double bisect(const F& f, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Critical points y of the squared distance from x to the ellipsoid
/// sum (y_i / a_i)^2 = 1, with the Lagrange parameter t of x - y = t y / a^2.
inline std::vector<std::pair<Vector, double>> ellipsoid_normal_feet(const Vector& x,
                                                                    const Vector& a) {
  const Eigen::Index n = x.size();
  const Vector a2 = a.array().square().matrix();
  const double scale = std::max(x.norm(), a.maxCoeff());
  std::vector<char> active(static_cast<std::size_t>(n));
  std::vector<double> poles;
  for (Eigen::Index i = 0; i < n; ++i) {
    active[static_cast<std::size_t>(i)] = std::abs(x[i]) > 1e-13 * scale;
    if (active[static_cast<std::size_t>(i)]) poles.push_back(-a2[i]);
  }
  std::sort(poles.begin(), poles.end());
  poles.erase(std::unique(poles.begin(), poles.end()), poles.end());

  const auto F = [&](double t) {
    double s = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      const double q = a[i] * x[i] / (t + a2[i]);
      s += q * q;
    }
    return s;
  };
  const auto foot = [&](double t) {
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = a2[i] * x[i] / (a2[i] + t);
    return y;
  };

  std::vector<std::pair<Vector, double>> out;
  if (!poles.empty()) {
    const double span = std::max(1.0, scale * scale);
    const auto tiny = [&](double pole) { return std::max(1e-15, 1e-15 * std::abs(pole)); };
    // Right of the largest pole: F falls from +inf to -1.
    {
      const double lo = poles.back() + tiny(poles.back());
      double hi = poles.back() + span;
      while (F(hi) > 0.0) hi += 2.0 * (hi - poles.back());
      if (F(lo) > 0.0) {
        const double t = bisect(F, lo, hi);
        out.emplace_back(foot(t), t);
      }
    }
    // Left of the smallest pole: F rises from -1 to +inf.
    {
      const double hi = poles.front() - tiny(poles.front());
      double lo = poles.front() - span;
      while (F(lo) > 0.0) lo -= 2.0 * (poles.front() - lo);
      if (F(hi) > 0.0) {
        const double t = bisect(F, lo, hi);
        out.emplace_back(foot(t), t);
      }
    }
    // Between poles F is convex with +inf at both ends: zero or two roots.
    for (std::size_t k = 0; k + 1 < poles.size(); ++k) {
      double lo = poles[k] + tiny(poles[k]), hi = poles[k + 1] - tiny(poles[k + 1]);
      double l = lo, h = hi;
      for (int it = 0; it < 300; ++it) {
        const double m1 = l + (h - l) / 3.0, m2 = h - (h - l) / 3.0;
        if (F(m1) < F(m2)) {
          h = m2;
        } else {
          l = m1;
        }
      }
      const double tmin = 0.5 * (l + h);
      if (F(tmin) >= 0.0) continue;
      const double t1 = bisect(F, lo, tmin);
      const double t2 = bisect(F, tmin, hi);
      out.emplace_back(foot(t1), t1);
      out.emplace_back(foot(t2), t2);
    }
  }
  // Degenerate roots: t = -a_j^2 for an inactive coordinate j frees y_j.
  for (Eigen::Index j = 0; j < n; ++j) {
    if (active[static_cast<std::size_t>(j)]) continue;
    const double t = -a2[j];
    Vector y = Vector::Zero(n);
    double rest = 1.0;
    bool ok = true;
    for (Eigen::Index i = 0; i < n && ok; ++i) {
      if (i == j) continue;
      if (std::abs(a2[i] - a2[j]) < 1e-12 * a2[j]) {
        ok = false;  // a pole, or a continuum of feet for equal axes
        continue;
      }
      y[i] = a2[i] * x[i] / (a2[i] - a2[j]);
      rest -= y[i] * y[i] / a2[i];
    }
    if (!ok || rest < 0.0) continue;
    y[j] = a[j] * std::sqrt(rest);
    out.emplace_back(y, t);
    if (y[j] != 0.0) {
      y[j] = -y[j];
      out.emplace_back(y, t);
    }
  }
  return out;
}

inline void add_unique(std::vector<EquilibriumReport>& out, EquilibriumReport rep) {
  for (const auto& r : out) {
    if ((r.p_star - rep.p_star).norm() < 1e-8) return;
  }
  out.push_back(std::move(rep));
}

}  // namespace detail

/// Points of the eroded boundary where p - p_d = lambda eta with lambda > 0.
/// Balls use the closed form, ellipsoids the normal-line roots of the
/// projection problem, spline curves a dense parameter scan with bisection.
/// The workspace walls of a convex workspace contribute none while p_d lies
/// in the interior of the practical free space.
inline std::vector<EquilibriumReport> find_equilibria(const Environment& env,
                                                      const DafParams& params) {
  params.validate();
  require(params.target.size() == env.dimension(), "target dimension mismatch");
  const Vector& pd = params.target;
  const double eps = env.epsilon();
  std::vector<EquilibriumReport> out;
  for (std::size_t i = 0; i < env.obstacles().size(); ++i) {
    const int index = static_cast<int>(i);
    const Obstacle& o = env.obstacles()[i];
    EquilibriumReport rep;
    if (const auto* b = std::get_if<Ball>(&o)) {
      const Vector away = b->center - pd;
      if (away.norm() == 0.0) continue;
      const Vector candidate = b->center + (b->radius + eps) * away.normalized();
      if (detail::complete_report(env, params, index, candidate, rep)) {
        detail::add_unique(out, rep);
      }
    } else if (const auto* e = std::get_if<Ellipsoid>(&o)) {
      const Vector x = e->orientation.transpose() * (pd - e->center);
      const Vector inv_a2 = e->semi_axes.array().square().inverse().matrix();
      for (const auto& [y, t] : detail::ellipsoid_normal_feet(x, e->semi_axes)) {
        const Vector g = y.cwiseProduct(inv_a2);
        const Vector normal = e->orientation * g.normalized();
        if (!(eps - t * g.norm() > 0.0)) continue;
        const Vector candidate = e->center + e->orientation * y + eps * normal;
        if (detail::complete_report(env, params, index, candidate, rep)) {
          detail::add_unique(out, rep);
        }
      }
    } else {
      const auto& curve = *std::get<Spline2D>(o).curve;
      const Eigen::Vector2d target(pd[0], pd[1]);
      const auto f = [&](double u) {
        const Eigen::Vector2d r = curve.position(u) - target;
        const Eigen::Vector2d nrm = curve.outward_normal(u);
        return r.x() * nrm.y() - r.y() * nrm.x();
      };
      const std::size_t samples =
          std::max<std::size_t>(4000, 64 * curve.control_points().size());
      const double period = curve.period();
      double u_prev = 0.0, f_prev = f(0.0);
      for (std::size_t k = 1; k <= samples; ++k) {
        const double u = period * static_cast<double>(k) / static_cast<double>(samples);
        const double fu = f(u);
        if (f_prev == 0.0 || (fu < 0.0) != (f_prev < 0.0)) {
          const double root = f_prev == 0.0 ? u_prev : detail::bisect(f, u_prev, u);
          const Eigen::Vector2d q = curve.position(root) + eps * curve.outward_normal(root);
          if ((q - target).dot(curve.outward_normal(root)) > 0.0 &&
              detail::complete_report(env, params, index, Vector(q), rep)) {
            detail::add_unique(out, rep);
          }
        }
        u_prev = u;
        f_prev = fu;
      }
    }
  }
  return out;
}

/// Quantities of the clearance-margin dynamics along the normal.
struct DistanceDynamics {
  double d_dot = 0.0;   // eta^T v
  double Phi = 0.0;     // gamma(d) d_dot
  double alpha = 0.0;   // k1 eta^T (p - p_d) - v^T H v
  double d_ddot = 0.0;  // -k3 Phi - k2 d_dot - alpha
};

inline DistanceDynamics distance_dynamics(const Vector& p, const Vector& v,
                                          const DistanceQuery& q, const DafParams& params) {
  if (!(q.d > 0.0)) throw SafetyViolation("distance dynamics need a positive margin", q.d);
  DistanceDynamics out;
  out.d_dot = q.eta.dot(v);
  out.Phi = gamma(q.d, params.phi()) * out.d_dot;
  out.alpha = params.k1 * q.eta.dot(p - params.target) - v.dot(q.hessian * v);
  out.d_ddot = -params.k3 * out.Phi - params.k2 * out.d_dot - out.alpha;
  return out;
}

/// Settings of escape_probe.
struct ProbeConfig {
  SimConfig sim = [] {
    SimConfig c;
    c.dt = 1e-4;
    c.t_max = 30.0;
    c.record_stride = 10;
    c.stall_window = 5.0;  // the start itself moves at about vel_tol
    return c;
  }();
  // The start is lifted off the eroded boundary by lift * sigma along the
  // normal. At the tangential offset alone the margin is only O(sigma^2),
  // where the avoidance damping is too stiff for fixed-step integration.
  double lift = 1.0;
  double escape_radius = 10.0;  // in units of sigma
  bool stop_on_escape = true;   // end the run once the escape radius is crossed
  int max_retries = 10;
};

struct ProbeResult {
  Trajectory trajectory;
  bool escaped = false;
  double sigma = 0.0;          // perturbation actually used
  double max_excursion = 0.0;  // max |p - p*| over the samples
  std::vector<double> W;       // k1 |p - p*|^2 / 2 + |v|^2 / 2 per sample
};

/// Perturbs the equilibrium along the principal direction of largest
/// curvature, p = p* + sigma nu (+ lift), v = sigma nu, and integrates.
/// sigma = 0 returns the equilibrium itself, held for t_max.
inline ProbeResult escape_probe(const Environment& env, const EquilibriumReport& rep,
                                const DafParams& params, double sigma = 1e-3,
                                const ProbeConfig& cfg = {}) {
  require(sigma >= 0.0 && std::isfinite(sigma), "sigma must be non-negative");
  require(!rep.principal_dirs.empty(), "equilibrium report has no principal directions");
  ProbeResult out;
  const auto W = [&](const Vector& p, const Vector& v) {
    return 0.5 * params.k1 * (p - rep.p_star).squaredNorm() + 0.5 * v.squaredNorm();
  };
  if (sigma == 0.0) {
    Trajectory& t = out.trajectory;
    const Vector zero = Vector::Zero(rep.p_star.size());
    for (double time : {0.0, cfg.sim.t_max}) {
      t.samples.push_back({time, rep.p_star, zero, zero, 0.0, lyapunov(rep.p_star, zero, params),
                           rep.eta, 0.0});
      out.W.push_back(0.0);
    }
    t.outcome = Outcome::kStalled;
    t.stall_point = rep.p_star;
    t.end_time = cfg.sim.t_max;
    t.target = params.target;
    t.epsilon = env.epsilon();
    t.pos_tol = cfg.sim.pos_tol;
    t.position_gain = params.k1;
    return out;
  }

  const Vector nu = rep.max_direction().normalized();
  const Controller controller{params};
  double s = sigma;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt, s *= 0.5) {
    State init{rep.p_star + s * nu + cfg.lift * s * rep.eta, s * nu};
    if (!env.in_workspace(init.p) || !(env.nearest(init.p).d0 > env.epsilon())) continue;
    out.sigma = s;
    const double radius = cfg.escape_radius * s;
    const auto until_escaped = [&](double, const State& st) {
      return !cfg.stop_on_escape || (st.p - rep.p_star).norm() <= radius;
    };
    out.trajectory = simulate(env, controller, init, cfg.sim, until_escaped);
    for (const auto& sample : out.trajectory.samples) {
      out.W.push_back(W(sample.p, sample.v));
      out.max_excursion = std::max(out.max_excursion, (sample.p - rep.p_star).norm());
    }
    out.escaped = out.max_excursion > radius;
    return out;
  }
  throw ConfigError("no perturbed start in the free space after halving sigma repeatedly");
}

struct RunMetrics {
  double path_length = 0.0;
  double peak_accel = 0.0;     // max |u|
  double peak_speed = 0.0;     // max |v|
  double min_clearance = std::numeric_limits<double>::infinity();  // min d0
  double settle_time = std::numeric_limits<double>::infinity();    // inf: never settled
};

inline RunMetrics metrics(const Trajectory& traj) {
  require(!traj.samples.empty(), "metrics need a non-empty trajectory");
  RunMetrics m;
  const auto& s = traj.samples;
  std::optional<double> settled;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 0) m.path_length += (s[i].p - s[i - 1].p).norm();
    if (s[i].u.size() > 0) m.peak_accel = std::max(m.peak_accel, s[i].u.norm());
    m.peak_speed = std::max(m.peak_speed, s[i].v.norm());
    m.min_clearance = std::min(m.min_clearance, s[i].d + traj.epsilon);
    const bool inside = traj.target.size() == s[i].p.size() &&
                        (s[i].p - traj.target).norm() < traj.pos_tol;
    if (!inside) {
      settled.reset();
    } else if (!settled) {
      settled = s[i].t;
    }
  }
  if (settled) m.settle_time = *settled;
  return m;
}

/// Energy bookkeeping of a DAF run: the drop of L against the trapezoidal
/// integral of k2 |v|^2 + k3 gamma(d) (eta^T v)^2 over the samples.
struct EnergyBudget {
  double drop = 0.0;
  double dissipated = 0.0;
  double max_increase = 0.0;  // largest sample-to-sample rise of L

  double relative_error() const {
    const double scale = std::max(std::abs(drop), std::numeric_limits<double>::min());
    return std::abs(drop - dissipated) / scale;
  }
};

inline EnergyBudget energy_budget(const Trajectory& traj, const DafParams& params) {
  require(!traj.samples.empty(), "energy budget needs a non-empty trajectory");
  const auto phi = params.phi();
  const auto rate = [&](const Sample& x) {
    const double g = std::isfinite(x.d_used) ? gamma(x.d_used, phi) : 0.0;
    const double vn = g != 0.0 ? x.eta.dot(x.v) : 0.0;
    return params.k2 * x.v.squaredNorm() + params.k3 * g * vn * vn;
  };
  EnergyBudget b;
  const auto& s = traj.samples;
  for (std::size_t i = 1; i < s.size(); ++i) {
    b.dissipated += 0.5 * (s[i].t - s[i - 1].t) * (rate(s[i]) + rate(s[i - 1]));
    b.max_increase = std::max(b.max_increase, s[i].L - s[i - 1].L);
  }
  b.drop = s.front().L - s.back().L;
  return b;
}

/// Mean of Phi = gamma(d) eta^T v over the trailing `window` seconds.
inline double terminal_phi_average(const Trajectory& traj, const DafParams& params,
                                   double window = 1.0) {
  require(!traj.samples.empty(), "trajectory is empty");
  const auto phi = params.phi();
  const double t_end = traj.samples.back().t;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : traj.samples) {
    if (s.t < t_end - window) continue;
    sum += gamma(s.d_used, phi) * s.eta.dot(s.v);
    ++count;
  }
  return sum / static_cast<double>(count);
}

/// Alignment residual |(p - p_d)/|p - p_d| - eta(p)| at a stall point.
inline double equilibrium_residual(const Environment& env, const Vector& p,
                                   const Vector& target) {
  return detail::alignment_residual(p, target, env.nearest(p).eta);
}

}  // namespace daf

#endif  // DAF_ANALYSIS_HPP_
