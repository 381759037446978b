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

#ifndef DAF_GEOMETRY_HPP_
#define DAF_GEOMETRY_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "daf/spline_curve.hpp"
#include "daf/types.hpp"

namespace daf {

// ---------------------------------------------------------------------------
// Obstacles and workspace
// ---------------------------------------------------------------------------

struct Ball {
  Vector center;
  double radius = 1.0;
};

/// Solid ellipsoid {c + R y : sum (y_i / a_i)^2 <= 1}. Columns of
/// `orientation` are the principal axes in world coordinates.
struct Ellipsoid {
  Vector center;
  Vector semi_axes;
  Matrix orientation;
};

/// Region enclosed by a closed cubic spline (planar environments only).
struct Spline2D {
  std::shared_ptr<const ClosedSpline2D> curve;
};

using Obstacle = std::variant<Ball, Ellipsoid, Spline2D>;

struct BoxWorkspace {
  Vector lower;
  Vector upper;
};

struct BallWorkspace {
  Vector center;
  double radius = 1.0;
};

struct UnboundedWorkspace {};

using Workspace = std::variant<BoxWorkspace, BallWorkspace, UnboundedWorkspace>;

inline Obstacle make_ball(Vector center, double radius) {
  require(radius > 0.0 && std::isfinite(radius), "ball radius must be positive");
  require(all_finite(center), "ball center must be finite");
  return Ball{std::move(center), radius};
}

inline Obstacle make_ellipsoid(Vector center, Vector semi_axes,
                               std::optional<Matrix> orientation = std::nullopt) {
  const Eigen::Index n = center.size();
  require(semi_axes.size() == n, "ellipsoid semi-axes dimension mismatch");
  require(all_finite(center), "ellipsoid center must be finite");
  require((semi_axes.array() > 0.0).all() && semi_axes.allFinite(),
          "ellipsoid semi-axes must be positive");
  Matrix frame = orientation.value_or(Matrix::Identity(n, n));
  require(frame.rows() == n && frame.cols() == n, "ellipsoid orientation dimension mismatch");
  require((frame.transpose() * frame - Matrix::Identity(n, n)).norm() < 1e-9,
          "ellipsoid orientation must be orthonormal");
  return Ellipsoid{std::move(center), std::move(semi_axes), std::move(frame)};
}

inline Matrix rotation_2d(double angle) {
  Matrix r(2, 2);
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

inline Obstacle make_spline(const std::vector<Eigen::Vector2d>& points) {
  return Spline2D{std::make_shared<const ClosedSpline2D>(points)};
}

inline Eigen::Index obstacle_dimension(const Obstacle& o) {
  return std::visit(
      [](const auto& s) -> Eigen::Index {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Spline2D>) {
          return 2;
        } else {
          return s.center.size();
        }
      },
      o);
}

// ---------------------------------------------------------------------------
// Per-shape projections
// ---------------------------------------------------------------------------

/// Nearest boundary point of a single shape, seen from a point outside it.
struct ShapeProjection {
  double distance = std::numeric_limits<double>::infinity();
  Vector foot;
  Vector normal;  // unit, from foot toward the query point
  bool inside = false;
  // A second locally-nearest foot, when the shape offers one.
  std::optional<Vector> alternative_foot;
  double alternative_distance = std::numeric_limits<double>::infinity();
};

namespace detail {

inline ShapeProjection project(const Ball& b, const Vector& p, double /*cutoff*/) {
  ShapeProjection out;
  const Vector r = p - b.center;
  const double len = r.norm();
  if (len <= b.radius) {
    out.inside = true;
    out.distance = 0.0;
    out.foot = p;
    out.normal = len > 0.0 ? Vector(r / len) : Vector(Vector::Unit(p.size(), 0));
    return out;
  }
  out.normal = r / len;
  out.foot = b.center + b.radius * out.normal;
  out.distance = len - b.radius;
  return out;
}

struct EllipsoidFoot {
  Vector foot;      // local frame
  Vector gradient;  // y / a^2 at the foot, local frame
  double t = 0.0;   // Lagrange multiplier
  double distance = 0.0;
  bool converged = false;
};

// Exterior projection onto an axis-aligned origin-centred ellipsoid by
// Newton iteration on the scalar Lagrange equation
//   F(t) = sum (a_i x_i / (t + a_i^2))^2 - 1 = 0,  t >= 0,
// which is convex and decreasing on t > -min a_i^2, so Newton started left
// of the root increases monotonically onto it.
inline EllipsoidFoot ellipsoid_foot_newton(const Vector& x, const Vector& a) {
  const Vector a2 = a.array().square();
  const double amin = a.minCoeff();
  const double amax = a.maxCoeff();
  double t = std::max(0.0, amin * x.norm() - amax * amax);
  EllipsoidFoot out;
  for (int it = 0; it < 100; ++it) {
    double f = -1.0, df = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double q = a[i] * x[i] / (t + a2[i]);
      f += q * q;
      df -= 2.0 * q * q / (t + a2[i]);
    }
    if (df == 0.0) break;
    const double step = -f / df;
    t += step;
    if (std::abs(step) <= 1e-12 * std::max(1.0, t)) {
      out.converged = true;
      break;
    }
  }
  out.t = t;
  out.foot = (a2.array() * x.array() / (t + a2.array())).matrix();
  out.gradient = (out.foot.array() / a2.array()).matrix();
  out.distance = t * out.gradient.norm();
  return out;
}

inline std::vector<Vector> unit_sphere_samples(Eigen::Index n, std::size_t count,
                                               std::uint64_t seed = 7) {
  std::vector<Vector> dirs;
  dirs.reserve(count);
  if (n == 2) {
    for (std::size_t k = 0; k < count; ++k) {
      const double th = 2.0 * std::numbers::pi * static_cast<double>(k) / count;
      dirs.push_back(make_vector({std::cos(th), std::sin(th)}));
    }
  } else if (n == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t k = 0; k < count; ++k) {
      const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) / count;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * static_cast<double>(k);
      dirs.push_back(make_vector({r * std::cos(phi), r * std::sin(phi), z}));
    }
  } else {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (std::size_t k = 0; k < count; ++k) {
      Vector v(n);
      for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
      dirs.push_back(v.normalized());
    }
  }
  return dirs;
}

// Dense-sampling fallback followed by a short projected refinement.
inline EllipsoidFoot ellipsoid_foot_sampled(const Vector& x, const Vector& a) {
  const auto dirs = unit_sphere_samples(x.size(), x.size() == 2 ? 20000 : 50000);
  double best = std::numeric_limits<double>::infinity();
  Vector foot;
  for (const auto& s : dirs) {
    const Vector y = (a.array() * s.array()).matrix();
    const double dist = (y - x).norm();
    if (dist < best) {
      best = dist;
      foot = y;
    }
  }
  EllipsoidFoot out;
  out.foot = foot;
  out.gradient = (foot.array() / a.array().square()).matrix();
  out.distance = best;
  out.t = best / out.gradient.norm();
  return out;
}

inline ShapeProjection project(const Ellipsoid& e, const Vector& p, double /*cutoff*/) {
  ShapeProjection out;
  const Vector x = e.orientation.transpose() * (p - e.center);
  const double level = (x.array() / e.semi_axes.array()).square().sum();
  if (level <= 1.0) {
    out.inside = true;
    out.distance = 0.0;
    out.foot = p;
    out.normal = Vector::Unit(p.size(), 0);
    return out;
  }
  EllipsoidFoot f = ellipsoid_foot_newton(x, e.semi_axes);
  if (!f.converged || !std::isfinite(f.distance)) f = ellipsoid_foot_sampled(x, e.semi_axes);
  out.foot = e.center + e.orientation * f.foot;
  out.normal = e.orientation * f.gradient.normalized();
  out.distance = f.distance;
  return out;
}

inline ShapeProjection project(const Spline2D& s, const Vector& p, double cutoff) {
  ShapeProjection out;
  const Eigen::Vector2d q(p[0], p[1]);
  if (s.curve->contains(q)) {
    out.inside = true;
    out.distance = 0.0;
    out.foot = p;
    out.normal = Vector::Unit(2, 0);
    return out;
  }
  const auto proj = s.curve->project(q, cutoff);
  if (!std::isfinite(proj.distance)) return out;
  out.distance = proj.distance;
  out.foot = proj.foot;
  if (proj.distance > 1e-9) {
    out.normal = (q - proj.foot) / proj.distance;
  } else {
    out.normal = s.curve->outward_normal(proj.u);
  }
  if (proj.alternative_foot) {
    out.alternative_foot = Vector(*proj.alternative_foot);
    out.alternative_distance = proj.alternative_distance;
  }
  return out;
}

inline double lower_bound(const Ball& b, const Vector& p) {
  return std::max(0.0, (p - b.center).norm() - b.radius);
}
inline double lower_bound(const Ellipsoid& e, const Vector& p) {
  return std::max(0.0, (p - e.center).norm() - e.semi_axes.maxCoeff());
}
inline double lower_bound(const Spline2D& s, const Vector& p) {
  return s.curve->lower_bound(Eigen::Vector2d(p[0], p[1]));
}

}  // namespace detail

inline ShapeProjection project_obstacle(const Obstacle& o, const Vector& p,
                                        double cutoff = std::numeric_limits<double>::infinity()) {
  return std::visit([&](const auto& s) { return detail::project(s, p, cutoff); }, o);
}

/// Distance lower bound from a bounding sphere; cheap culling only.
inline double obstacle_lower_bound(const Obstacle& o, const Vector& p) {
  return std::visit([&](const auto& s) { return detail::lower_bound(s, p); }, o);
}

/// Bounding sphere (center, radius) of an obstacle.
inline std::pair<Vector, double> obstacle_bounds(const Obstacle& o) {
  return std::visit(
      [](const auto& s) -> std::pair<Vector, double> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Ball>) {
          return {s.center, s.radius};
        } else if constexpr (std::is_same_v<T, Ellipsoid>) {
          return {s.center, s.semi_axes.maxCoeff()};
        } else {
          return {Vector(s.curve->bounding_center()), s.curve->bounding_radius()};
        }
      },
      o);
}

namespace detail {

// Distance from an interior point to the workspace boundary, with an
// optional runner-up foot (second nearest face, antipode through the centre).
inline ShapeProjection project(const BoxWorkspace& w, const Vector& p) {
  ShapeProjection out;
  const Eigen::Index n = p.size();
  if ((p.array() < w.lower.array()).any() || (p.array() > w.upper.array()).any()) {
    throw ConfigError("point lies outside the workspace");
  }
  double best = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
  Eigen::Index best_axis = 0, second_axis = 0;
  bool best_low = true, second_low = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (bool low : {true, false}) {
      const double dist = low ? p[i] - w.lower[i] : w.upper[i] - p[i];
      if (dist < best) {
        second = best;
        second_axis = best_axis;
        second_low = best_low;
        best = dist;
        best_axis = i;
        best_low = low;
      } else if (dist < second) {
        second = dist;
        second_axis = i;
        second_low = low;
      }
    }
  }
  const auto foot_on = [&](Eigen::Index axis, bool low) {
    Vector f = p;
    f[axis] = low ? w.lower[axis] : w.upper[axis];
    return f;
  };
  out.distance = best;
  out.foot = foot_on(best_axis, best_low);
  out.normal = Vector::Zero(n);
  out.normal[best_axis] = best_low ? 1.0 : -1.0;
  out.alternative_foot = foot_on(second_axis, second_low);
  out.alternative_distance = second;
  return out;
}

inline ShapeProjection project(const BallWorkspace& w, const Vector& p) {
  ShapeProjection out;
  const Vector r = p - w.center;
  const double len = r.norm();
  if (len > w.radius) throw ConfigError("point lies outside the workspace");
  const Vector u = len > 0.0 ? Vector(r / len) : Vector(Vector::Unit(p.size(), 0));
  out.distance = w.radius - len;
  out.foot = w.center + w.radius * u;
  out.normal = -u;
  if (len < 1e-9) {
    out.alternative_foot = Vector(w.center - w.radius * u);
    out.alternative_distance = w.radius + len;
  }
  return out;
}

inline ShapeProjection project(const UnboundedWorkspace&, const Vector&) { return {}; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

/// Immutable description of the free space: workspace, obstacles and the
/// safety margins attached to them.
class Environment {
 public:
  Environment(Workspace workspace, std::vector<Obstacle> obstacles, double epsilon,
              double robot_radius, std::optional<double> reach_bound = std::nullopt,
              std::optional<double> regularity_bound = std::nullopt)
      : workspace_(std::move(workspace)),
        obstacles_(std::move(obstacles)),
        epsilon_(epsilon),
        robot_radius_(robot_radius),
        reach_bound_(reach_bound),
        regularity_bound_(regularity_bound) {
    require(epsilon_ > 0.0 && std::isfinite(epsilon_), "epsilon must be positive");
    require(robot_radius_ > 0.0 && std::isfinite(robot_radius_), "robot radius must be positive");
    if (reach_bound_) require(*reach_bound_ > 0.0, "reach bound must be positive");
    if (regularity_bound_) require(*regularity_bound_ > 0.0, "regularity bound must be positive");
    dimension_ = std::visit(
        [this](const auto& w) -> Eigen::Index {
          using T = std::decay_t<decltype(w)>;
          if constexpr (std::is_same_v<T, BoxWorkspace>) {
            require(w.lower.size() == w.upper.size(), "workspace corner dimension mismatch");
            require((w.upper.array() > w.lower.array()).all(), "workspace box has empty interior");
            return w.lower.size();
          } else if constexpr (std::is_same_v<T, BallWorkspace>) {
            require(w.radius > 0.0, "workspace ball radius must be positive");
            return w.center.size();
          } else {
            require(!obstacles_.empty(), "unbounded workspace requires at least one obstacle");
            return obstacle_dimension(obstacles_.front());
          }
        },
        workspace_);
    require(dimension_ >= 2, "dimension must be at least 2");
    for (const auto& o : obstacles_) {
      require(obstacle_dimension(o) == dimension_, "obstacle dimension mismatch");
      bounds_.push_back(obstacle_bounds(o));
    }
  }

  Eigen::Index dimension() const { return dimension_; }
  const Workspace& workspace() const { return workspace_; }
  const std::vector<Obstacle>& obstacles() const { return obstacles_; }
  double epsilon() const { return epsilon_; }
  double robot_radius() const { return robot_radius_; }
  std::optional<double> reach_bound() const { return reach_bound_; }
  std::optional<double> regularity_bound() const { return regularity_bound_; }
  const std::vector<std::pair<Vector, double>>& obstacle_bounds_list() const { return bounds_; }

  bool in_workspace(const Vector& p) const {
    return std::visit(
        [&](const auto& w) {
          using T = std::decay_t<decltype(w)>;
          if constexpr (std::is_same_v<T, BoxWorkspace>) {
            return (p.array() >= w.lower.array()).all() && (p.array() <= w.upper.array()).all();
          } else if constexpr (std::is_same_v<T, BallWorkspace>) {
            return (p - w.center).norm() <= w.radius;
          } else {
            return true;
          }
        },
        workspace_);
  }

  /// Source index of a boundary feature: -1 is the workspace wall.
  static constexpr int kWorkspace = -1;

  struct Nearest {
    double d0 = std::numeric_limits<double>::infinity();
    Vector foot;
    Vector eta;
    int source = kWorkspace;
    bool ambiguous = false;
  };

  /// Nearest point of the obstacle region. `mask`, when given, restricts the
  /// search to the flagged obstacles (the workspace is always included).
  Nearest nearest(const Vector& p, const std::vector<char>* mask = nullptr) const {
    require(p.size() == dimension_, "query point dimension mismatch");
    require(all_finite(p), "query point must be finite");
    Nearest out;
    struct Candidate {
      double dist;
      Vector foot;
    };
    std::vector<Candidate> candidates;
    const auto consider = [&](const ShapeProjection& s, int source) {
      if (!std::isfinite(s.distance)) return;
      candidates.push_back({s.distance, s.foot});
      if (s.alternative_foot) candidates.push_back({s.alternative_distance, *s.alternative_foot});
      if (s.distance < out.d0) {
        out.d0 = s.distance;
        out.foot = s.foot;
        out.eta = s.normal;
        out.source = source;
      }
    };
    consider(std::visit([&](const auto& w) { return detail::project(w, p); }, workspace_),
             kWorkspace);
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
      if (mask && !(*mask)[i]) continue;
      const double lb = std::max(0.0, (p - bounds_[i].first).norm() - bounds_[i].second);
      if (lb > out.d0 + 1e-6) continue;
      consider(project_obstacle(obstacles_[i], p, out.d0 + 1e-6), static_cast<int>(i));
      if (out.d0 == 0.0) break;
    }
    if (out.d0 > 0.0 && std::isfinite(out.d0)) {
      for (const auto& c : candidates) {
        if (std::abs(c.dist - out.d0) < kAmbiguityDistanceGap &&
            (c.foot - out.foot).norm() > kAmbiguityFootGap) {
          out.ambiguous = true;
        }
      }
    }
    if (!std::isfinite(out.d0)) {
      out.foot = p;
      out.eta = Vector::Zero(dimension_);
    }
    return out;
  }

  /// Distance to the obstacle region for a point known to be outside every
  /// obstacle. Never overestimates by more than rounding, so it is safe as a
  /// sphere-tracing step. Faster than nearest(): no feet, no ambiguity test.
  double clearance(const Vector& p, const std::vector<char>* mask = nullptr) const {
    double best = std::visit(
        [&](const auto& w) -> double {
          using T = std::decay_t<decltype(w)>;
          if constexpr (std::is_same_v<T, BoxWorkspace>) {
            const double lo = (p - w.lower).minCoeff();
            const double hi = (w.upper - p).minCoeff();
            return std::max(0.0, std::min(lo, hi));
          } else if constexpr (std::is_same_v<T, BallWorkspace>) {
            return std::max(0.0, w.radius - (p - w.center).norm());
          } else {
            return std::numeric_limits<double>::infinity();
          }
        },
        workspace_);
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
      if (mask && !(*mask)[i]) continue;
      const double lb = (p - bounds_[i].first).norm() - bounds_[i].second;
      if (lb >= best) continue;
      double dist;
      if (const auto* b = std::get_if<Ball>(&obstacles_[i])) {
        dist = std::max(0.0, (p - b->center).norm() - b->radius);
      } else if (const auto* s = std::get_if<Spline2D>(&obstacles_[i])) {
        dist = s->curve->distance(Eigen::Vector2d(p[0], p[1]), best);
      } else {
        dist = project_obstacle(obstacles_[i], p).distance;
      }
      best = std::min(best, dist);
    }
    return best;
  }

  static constexpr double kAmbiguityFootGap = 1e-6;
  static constexpr double kAmbiguityDistanceGap = 1e-9;

 private:
  Workspace workspace_;
  std::vector<Obstacle> obstacles_;
  double epsilon_;
  double robot_radius_;
  std::optional<double> reach_bound_;
  std::optional<double> regularity_bound_;
  Eigen::Index dimension_ = 0;
  std::vector<std::pair<Vector, double>> bounds_;
};

// ---------------------------------------------------------------------------
// Distance-field queries
// ---------------------------------------------------------------------------

/// Distance from p to the obstacle region (workspace complement included);
/// zero inside obstacles.
inline double distance(const Environment& env, const Vector& p) {
  if (!env.in_workspace(p)) throw ConfigError("point lies outside the workspace");
  return env.nearest(p).d0;
}

struct DistanceQuery {
  double d0 = 0.0;  // distance to the obstacle region
  double d = 0.0;   // d0 - epsilon
  Vector eta;       // unit normal, from the nearest boundary point toward p
  Matrix hessian;   // Hessian of the distance field
  Vector foot;      // nearest boundary point
  int source = Environment::kWorkspace;
};

namespace detail {

inline Matrix ball_hessian(const Vector& p, const Vector& center) {
  const Vector r = p - center;
  const double len = r.norm();
  const Vector u = r / len;
  const Eigen::Index n = p.size();
  return (Matrix::Identity(n, n) - u * u.transpose()) / len;
}

// Hessian of the exterior distance to an ellipsoid, from the shape operator
// S at the foot:  H = S (I + d S)^-1  on the tangent space, zero along the
// normal.
inline Matrix ellipsoid_hessian(const Ellipsoid& e, const Vector& p) {
  const Eigen::Index n = p.size();
  const Vector x = e.orientation.transpose() * (p - e.center);
  EllipsoidFoot f = ellipsoid_foot_newton(x, e.semi_axes);
  if (!f.converged) f = ellipsoid_foot_sampled(x, e.semi_axes);
  const double gnorm = f.gradient.norm();
  const Vector normal = f.gradient / gnorm;
  const Matrix proj = Matrix::Identity(n, n) - normal * normal.transpose();
  const Vector inv_a2 = e.semi_axes.array().square().inverse().matrix();
  const Matrix shape = proj * inv_a2.asDiagonal() * proj / gnorm;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (shape + shape.transpose()));
  Vector vals = eig.eigenvalues();
  for (Eigen::Index i = 0; i < n; ++i) vals[i] = vals[i] / (1.0 + f.distance * vals[i]);
  const Matrix local = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
  return e.orientation * local * e.orientation.transpose();
}

}  // namespace detail

/// Central finite difference of the normal field, symmetrized.
inline Matrix finite_difference_hessian(const Environment& env, const Vector& p,
                                        double step = 1e-5) {
  const Eigen::Index n = p.size();
  Matrix h(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Vector plus = p, minus = p;
    plus[j] += step;
    minus[j] -= step;
    h.col(j) = (env.nearest(plus).eta - env.nearest(minus).eta) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

namespace detail {

// Perturbed projections jump across the skeleton.
inline bool near_skeleton(const Environment& env, const Vector& p, const Vector& foot) {
  constexpr double kStep = 1e-6;
  constexpr double kJump = 1e-4;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    for (double sign : {1.0, -1.0}) {
      Vector q = p;
      q[i] += sign * kStep;
      if (!env.in_workspace(q)) continue;
      const auto nq = env.nearest(q);
      if (nq.ambiguous || (nq.foot - foot).norm() > kJump) return true;
    }
  }
  return false;
}

}  // namespace detail

/// Full distance-field query at a free-space point: clearance, normal,
/// Hessian and foot. Throws SafetyViolation when p is not in the interior of
/// the free space and NonUniqueProjection next to the skeleton.
inline DistanceQuery query(const Environment& env, const Vector& p) {
  if (!env.in_workspace(p)) throw ConfigError("point lies outside the workspace");
  const auto near = env.nearest(p);
  if (!(near.d0 > 0.0)) {
    throw SafetyViolation("query point is not in the free-space interior", near.d0);
  }
  if (near.ambiguous || detail::near_skeleton(env, p, near.foot)) {
    throw NonUniqueProjection("nearest boundary point is not unique");
  }
  DistanceQuery q;
  q.d0 = near.d0;
  q.d = near.d0 - env.epsilon();
  q.eta = near.eta;
  q.foot = near.foot;
  q.source = near.source;
  const Eigen::Index n = p.size();
  if (near.source == Environment::kWorkspace) {
    if (const auto* ball = std::get_if<BallWorkspace>(&env.workspace())) {
      q.hessian = -detail::ball_hessian(p, ball->center);
    } else {
      q.hessian = Matrix::Zero(n, n);
    }
  } else {
    const Obstacle& o = env.obstacles()[static_cast<std::size_t>(near.source)];
    if (const auto* b = std::get_if<Ball>(&o)) {
      q.hessian = detail::ball_hessian(p, b->center);
    } else if (const auto* e = std::get_if<Ellipsoid>(&o)) {
      q.hessian = detail::ellipsoid_hessian(*e, p);
    } else {
      q.hessian = finite_difference_hessian(env, p);
    }
  }
  return q;
}

/// Nearest point of the free-space boundary.
inline Vector project_boundary(const Environment& env, const Vector& p) {
  if (!env.in_workspace(p)) throw ConfigError("point lies outside the workspace");
  const auto near = env.nearest(p);
  if (!(near.d0 > 0.0)) {
    throw SafetyViolation("projection requested from outside the free-space interior", near.d0);
  }
  if (!std::isfinite(near.d0)) throw ConfigError("free space has no boundary");
  if (near.ambiguous) throw NonUniqueProjection("nearest boundary point is not unique");
  return near.foot;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ValidationCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }
  const ValidationCheck* find(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

/// A boundary point together with its unit normal pointing into free space.
struct BoundarySample {
  Vector point;
  Vector normal;
};

inline std::vector<BoundarySample> boundary_samples(const Obstacle& o, std::size_t count) {
  std::vector<BoundarySample> out;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Ball>) {
          for (const auto& u : detail::unit_sphere_samples(s.center.size(), count)) {
            out.push_back({s.center + s.radius * u, u});
          }
        } else if constexpr (std::is_same_v<T, Ellipsoid>) {
          for (const auto& u : detail::unit_sphere_samples(s.center.size(), count)) {
            const Vector y = (s.semi_axes.array() * u.array()).matrix();
            const Vector g = (y.array() / s.semi_axes.array().square()).matrix();
            out.push_back({s.center + s.orientation * y, s.orientation * g.normalized()});
          }
        } else {
          const auto& params = s.curve->polyline_parameters();
          const std::size_t stride = std::max<std::size_t>(1, params.size() / count);
          for (std::size_t k = 0; k < params.size(); k += stride) {
            out.push_back({Vector(s.curve->position(params[k])),
                           Vector(s.curve->outward_normal(params[k]))});
          }
        }
      },
      o);
  return out;
}

namespace detail {

inline ShapeProjection project_wall(const Workspace& w, const Vector& p) {
  return std::visit(
      [&](const auto& ws) -> ShapeProjection {
        using T = std::decay_t<decltype(ws)>;
        if constexpr (std::is_same_v<T, UnboundedWorkspace>) {
          return {};
        } else {
          return project(ws, p);
        }
      },
      w);
}

// Minimum distance between two boundaries: best sample then alternating
// projections, which converge for convex pieces.
template <typename ProjectA, typename ProjectB>
double set_distance(const std::vector<BoundarySample>& samples_a, ProjectA&& proj_a,
                    ProjectB&& proj_b) {
  double best = std::numeric_limits<double>::infinity();
  Vector start;
  for (const auto& s : samples_a) {
    const auto pb = proj_b(s.point);
    if (pb.inside) return 0.0;
    if (pb.distance < best) {
      best = pb.distance;
      start = s.point;
    }
  }
  if (!std::isfinite(best)) return best;
  Vector a = start;
  for (int it = 0; it < 100; ++it) {
    const auto pb = proj_b(a);
    if (pb.inside) return 0.0;
    const auto pa = proj_a(pb.foot);
    if (pa.inside) return 0.0;
    const double gap = (pa.foot - pb.foot).norm();
    const bool improved = gap < best - 1e-15;
    best = std::min(best, gap);
    a = pa.foot;
    if (!improved) break;
  }
  return best;
}

}  // namespace detail

/// Checks the margin conditions and the separation of the obstacle region.
/// `probe_clearance` is the largest clearance at which projections must be
/// unique (defaults to epsilon; pass epsilon + eps2 when a controller is
/// attached).
inline ValidationReport validate_environment(const Environment& env,
                                             std::optional<double> probe_clearance = std::nullopt,
                                             std::size_t samples_per_obstacle = 720) {
  ValidationReport report;
  const double eps = env.epsilon();
  const double radius = env.robot_radius();
  char buf[256];

  std::snprintf(buf, sizeof(buf), "R=%g, epsilon=%g", radius, eps);
  report.checks.push_back({"robot_radius_below_epsilon", 0.0 < radius && radius < eps, buf});

  {
    bool ok = true;
    std::string detail = "no declared bounds";
    if (env.reach_bound() || env.regularity_bound()) {
      const double bound = std::min(env.reach_bound().value_or(INFINITY),
                                    env.regularity_bound().value_or(INFINITY));
      ok = eps < bound;
      std::snprintf(buf, sizeof(buf), "epsilon=%g, min(h, rho)=%g", eps, bound);
      detail = buf;
    }
    report.checks.push_back({"epsilon_below_declared_bounds", ok, detail});
  }

  const auto& obstacles = env.obstacles();
  std::vector<std::vector<BoundarySample>> samples;
  for (const auto& o : obstacles) samples.push_back(boundary_samples(o, samples_per_obstacle));

  {
    bool ok = true;
    std::string detail = "all obstacles inside the workspace";
    for (std::size_t i = 0; i < obstacles.size() && ok; ++i) {
      for (const auto& s : samples[i]) {
        if (!env.in_workspace(s.point)) {
          ok = false;
          std::snprintf(buf, sizeof(buf), "obstacle %zu leaves the workspace", i);
          detail = buf;
          break;
        }
      }
    }
    report.checks.push_back({"obstacles_inside_workspace", ok, detail});
  }

  {
    bool ok = true;
    double worst = std::numeric_limits<double>::infinity();
    std::string detail;
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
      const auto proj_i = [&](const Vector& p) { return project_obstacle(obstacles[i], p); };
      for (std::size_t j = i + 1; j < obstacles.size(); ++j) {
        const auto proj_j = [&](const Vector& p) { return project_obstacle(obstacles[j], p); };
        const double gap = detail::set_distance(samples[i], proj_i, proj_j);
        if (gap < worst) worst = gap;
        if (!(gap > 2.0 * eps)) {
          ok = false;
          std::snprintf(buf, sizeof(buf), "obstacles %zu and %zu separated by %.6g <= 2*epsilon; ",
                        i, j, gap);
          detail += buf;
        }
      }
      if (!std::holds_alternative<UnboundedWorkspace>(env.workspace()) &&
          env.in_workspace(samples[i].front().point)) {
        const auto proj_w = [&](const Vector& p) {
          if (!env.in_workspace(p)) {
            ShapeProjection s;
            s.inside = true;
            return s;
          }
          return detail::project_wall(env.workspace(), p);
        };
        double gap = std::numeric_limits<double>::infinity();
        for (const auto& s : samples[i]) {
          if (!env.in_workspace(s.point)) {
            gap = 0.0;
            break;
          }
          gap = std::min(gap, proj_w(s.point).distance);
        }
        if (gap < worst) worst = gap;
        if (!(gap > 2.0 * eps)) {
          ok = false;
          std::snprintf(buf, sizeof(buf), "obstacle %zu is %.6g from the workspace wall; ", i, gap);
          detail += buf;
        }
      }
    }
    if (ok) {
      std::snprintf(buf, sizeof(buf), "minimum separation %.6g > 2*epsilon=%.6g", worst, 2 * eps);
      detail = buf;
    }
    report.checks.push_back({"pairwise_clearance", ok, detail});
  }

  {
    bool ok = true;
    std::string detail = "control polygons and curves are simple";
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
      if (const auto* s = std::get_if<Spline2D>(&obstacles[i])) {
        if (!s->curve->polyline_is_simple()) {
          ok = false;
          std::snprintf(buf, sizeof(buf), "spline obstacle %zu self-intersects", i);
          detail = buf;
        }
      }
    }
    report.checks.push_back({"spline_simple", ok, detail});
  }

  {
    // Offset every obstacle sample along its normal and check that it is
    // still seen at exactly that clearance with a single nearest point.
    std::vector<double> levels = {eps};
    if (probe_clearance && *probe_clearance > eps) levels.push_back(*probe_clearance);
    std::size_t probes = 0, failures = 0;
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
      for (const auto& s : samples[i]) {
        for (double level : levels) {
          const Vector q = s.point + level * s.normal;
          if (!env.in_workspace(q)) {
            ++probes;
            ++failures;
            continue;
          }
          const auto near = env.nearest(q);
          ++probes;
          if (near.ambiguous || std::abs(near.d0 - level) > 1e-6 * std::max(1.0, level)) {
            ++failures;
          }
        }
      }
    }
    std::snprintf(buf, sizeof(buf), "%zu of %zu offset probes non-unique or occluded", failures,
                  probes);
    report.checks.push_back({"projection_uniqueness", failures == 0, buf});
  }
  return report;
}

}  // namespace daf

#endif  // DAF_GEOMETRY_HPP_
