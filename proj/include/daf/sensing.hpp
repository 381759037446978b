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

#ifndef DAF_SENSING_HPP_
#define DAF_SENSING_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "daf/geometry.hpp"
#include "daf/types.hpp"

namespace daf {

struct SensorConfig {
  double max_range = 5.0;
  int ray_count = 720;  // planar: evenly spaced bearings; 3D: Fibonacci sphere
  double noise_stddev = 0.0;

  void validate(Eigen::Index dimension) const {
    require(max_range > 0.0 && std::isfinite(max_range), "sensor max_range must be positive");
    require(noise_stddev >= 0.0 && std::isfinite(noise_stddev),
            "sensor noise_stddev must be non-negative");
    require(dimension == 2 || dimension == 3, "range sensor supports 2D and 3D only");
    require(ray_count >= 8, "sensor needs at least 8 rays");
  }
};

/// One sweep of range readings. A NaN range marks a ray with no return.
struct Scan {
  Vector origin;
  std::vector<Vector> directions;
  std::vector<double> ranges;
  double max_range = 0.0;
  double noise_stddev = 0.0;

  static bool hit(double range) { return !std::isnan(range); }
};

/// Ray directions used by scan(): uniform bearings in the plane, a
/// Fibonacci sphere in 3D.
inline std::vector<Vector> ray_directions(Eigen::Index dimension, int ray_count) {
  return detail::unit_sphere_samples(dimension, static_cast<std::size_t>(ray_count));
}

namespace detail {

// Per-thread cache of ray_directions().
inline const std::vector<Vector>& cached_directions(Eigen::Index dimension, int ray_count) {
  thread_local std::map<std::pair<Eigen::Index, int>, std::vector<Vector>> cache;
  auto it = cache.find({dimension, ray_count});
  if (it == cache.end()) {
    it = cache.emplace(std::pair{dimension, ray_count}, ray_directions(dimension, ray_count)).first;
  }
  return it->second;
}

// Marks obstacles whose bounding sphere meets the segment [o, o + range*dir].
inline void ray_mask(const Environment& env, const Vector& origin, const Vector& dir,
                     double max_range, std::vector<char>& mask) {
  const auto& bounds = env.obstacle_bounds_list();
  mask.assign(bounds.size(), 0);
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const Vector rel = bounds[i].first - origin;
    const double along = std::clamp(rel.dot(dir), 0.0, max_range);
    mask[i] = (rel - along * dir).norm() <= bounds[i].second ? 1 : 0;
  }
}

// Smallest root t >= 0 of |y + t w|^2 = 1 (y outside the unit sphere).
inline std::optional<double> unit_sphere_entry(const Vector& y, const Vector& w) {
  const double a = w.squaredNorm();
  const double b = y.dot(w);
  const double c = y.squaredNorm() - 1.0;
  const double disc = b * b - a * c;
  if (disc < 0.0 || a == 0.0) return std::nullopt;
  // Stable form of the smaller root.
  const double q = -(b + std::copysign(std::sqrt(disc), b));
  const double t0 = q / a, t1 = q != 0.0 ? c / q : t0;
  const double t = std::min(t0, t1);
  if (t >= 0.0) return t;
  return std::nullopt;
}

inline std::optional<double> obstacle_entry(const Obstacle& o, const Vector& origin,
                                            const Vector& dir, double max_range) {
  std::optional<double> t;
  if (const auto* b = std::get_if<Ball>(&o)) {
    t = unit_sphere_entry((origin - b->center) / b->radius, dir / b->radius);
  } else if (const auto* e = std::get_if<Ellipsoid>(&o)) {
    const Vector y = (e->orientation.transpose() * (origin - e->center)).cwiseQuotient(e->semi_axes);
    const Vector w = (e->orientation.transpose() * dir).cwiseQuotient(e->semi_axes);
    t = unit_sphere_entry(y, w);
  } else {
    const auto& curve = *std::get<Spline2D>(o).curve;
    t = curve.ray_intersection({origin[0], origin[1]}, {dir[0], dir[1]}, max_range);
  }
  if (t && *t > max_range) return std::nullopt;
  return t;
}

// Exit distance from the workspace; infinite when unbounded.
inline double wall_exit(const Workspace& ws, const Vector& origin, const Vector& dir) {
  double best = std::numeric_limits<double>::infinity();
  if (const auto* box = std::get_if<BoxWorkspace>(&ws)) {
    for (Eigen::Index i = 0; i < origin.size(); ++i) {
      if (dir[i] > 0.0) best = std::min(best, (box->upper[i] - origin[i]) / dir[i]);
      if (dir[i] < 0.0) best = std::min(best, (box->lower[i] - origin[i]) / dir[i]);
    }
  } else if (const auto* ball = std::get_if<BallWorkspace>(&ws)) {
    const Vector rel = origin - ball->center;
    const double b = rel.dot(dir);
    const double c = rel.squaredNorm() - ball->radius * ball->radius;
    best = -b + std::sqrt(std::max(0.0, b * b - c));
  }
  return std::max(0.0, best);
}

// First boundary crossing along the ray among the workspace and the
// obstacles flagged in `mask`.
inline std::optional<double> trace(const Environment& env, const Vector& origin, const Vector& dir,
                                   double max_range, const std::vector<char>* mask) {
  double best = wall_exit(env.workspace(), origin, dir);
  const auto& obstacles = env.obstacles();
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    if (const auto t = obstacle_entry(obstacles[i], origin, dir, std::min(best, max_range))) {
      best = std::min(best, *t);
    }
  }
  if (best <= max_range) return best;
  return std::nullopt;
}

}  // namespace detail

/// First intersection of the ray with the free-space boundary, computed
/// shape by shape. Empty when nothing lies within
/// max_range.
inline std::optional<double> ray_cast(const Environment& env, const Vector& origin,
                                      const Vector& dir, double max_range) {
  require(std::abs(dir.norm() - 1.0) < 1e-9, "ray direction must be a unit vector");
  if (!env.in_workspace(origin)) throw ConfigError("ray origin lies outside the workspace");
  const double start = env.nearest(origin).d0;
  if (!(start > 0.0)) throw SafetyViolation("ray origin lies inside the obstacle region", start);
  std::vector<char> mask;
  detail::ray_mask(env, origin, dir, max_range, mask);
  return detail::trace(env, origin, dir, max_range, &mask);
}

/// Full sweep from `origin`. Hits receive additive Gaussian noise drawn
/// from a stream seeded by `seed`, clamped to (0, max_range].
inline Scan scan(const Environment& env, const Vector& origin, const SensorConfig& cfg,
                 std::uint64_t seed = 0) {
  cfg.validate(env.dimension());
  if (!env.in_workspace(origin)) throw ConfigError("scan origin lies outside the workspace");
  const double start = env.clearance(origin);
  if (!(start > 0.0)) throw SafetyViolation("scan origin lies inside the obstacle region", start);

  Scan s;
  s.origin = origin;
  s.max_range = cfg.max_range;
  s.noise_stddev = cfg.noise_stddev;
  s.directions = detail::cached_directions(env.dimension(), cfg.ray_count);
  s.ranges.assign(s.directions.size(), std::numeric_limits<double>::quiet_NaN());

  // Obstacles out of reach of the whole sweep are never traced.
  const auto& bounds = env.obstacle_bounds_list();
  std::vector<char> reachable(bounds.size(), 0);
  bool any = false;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    reachable[i] = (origin - bounds[i].first).norm() - bounds[i].second <= cfg.max_range;
    any = any || reachable[i];
  }
  const bool walls_in_reach = start <= cfg.max_range;
  if (any || walls_in_reach) {
    std::vector<char> mask;
    for (std::size_t k = 0; k < s.directions.size(); ++k) {
      detail::ray_mask(env, origin, s.directions[k], cfg.max_range, mask);
      for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mask[i] && reachable[i];
      const auto hit = detail::trace(env, origin, s.directions[k], cfg.max_range, &mask);
      if (hit && *hit <= cfg.max_range) s.ranges[k] = *hit;
    }
  }

  if (cfg.noise_stddev > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, cfg.noise_stddev);
    for (double& r : s.ranges) {
      if (!Scan::hit(r)) continue;
      r = std::clamp(r + noise(rng), std::numeric_limits<double>::min(), cfg.max_range);
    }
  }
  return s;
}

/// Closest return of a sweep and the bearing from it toward the sensor,
/// i.e. the sensed counterpart of (d0, eta).
struct SensedObstacle {
  double d0 = 0.0;
  Vector eta;
};

namespace detail {

/// Median of a ray's range and those of its angular neighbours (the two on
/// either side in the plane, the four closest directions in 3D). No-hit
/// neighbours are skipped.
inline double neighbourhood_median(const Scan& s, std::size_t k) {
  const std::size_t n = s.ranges.size();
  std::vector<double> vals{s.ranges[k]};
  if (s.origin.size() == 2) {
    for (std::size_t off : {1u, 2u}) {
      for (std::size_t j : {(k + off) % n, (k + n - off) % n}) {
        if (Scan::hit(s.ranges[j])) vals.push_back(s.ranges[j]);
      }
    }
  } else {
    std::array<std::pair<double, std::size_t>, 4> closest;
    closest.fill({-2.0, n});
    for (std::size_t j = 0; j < n; ++j) {
      if (j == k) continue;
      const double c = s.directions[j].dot(s.directions[k]);
      if (c > closest.back().first) {
        closest.back() = {c, j};
        std::sort(closest.begin(), closest.end(), std::greater<>());
      }
    }
    for (const auto& [c, j] : closest) {
      if (j < n && Scan::hit(s.ranges[j])) vals.push_back(s.ranges[j]);
    }
  }
  std::nth_element(vals.begin(), vals.begin() + vals.size() / 2, vals.end());
  return vals[vals.size() / 2];
}

/// Noise-free estimate from the minimum ray `best`: in the plane a parabola
/// through its two neighbours refines range and bearing. `range(k)` is NaN
/// for a ray without a return.
template <typename RangeFn>
SensedObstacle refine_minimum(std::size_t best, std::size_t n, Eigen::Index dim,
                              const Vector& best_dir, RangeFn&& range) {
  SensedObstacle out;
  out.d0 = range(best);
  out.eta = -best_dir;
  if (dim == 2 && n >= 3) {
    const double rm = range((best + n - 1) % n);
    const double rp = range((best + 1) % n);
    const double r0 = out.d0;
    if (Scan::hit(rm) && Scan::hit(rp)) {
      const double denom = rm - 2.0 * r0 + rp;
      if (denom > 0.0) {
        const double offset = std::clamp(0.5 * (rm - rp) / denom, -0.5, 0.5);
        const double step = 2.0 * std::numbers::pi / static_cast<double>(n);
        const double angle = std::atan2(best_dir[1], best_dir[0]) + offset * step;
        out.d0 = r0 - 0.25 * (rm - rp) * offset;
        out.eta = -make_vector({std::cos(angle), std::sin(angle)});
      }
    }
  }
  return out;
}

}  // namespace detail

/// Minimum range, refined in the plane by a parabola through the two
/// neighbouring rays; ties go to the lowest ray index. For noisy scans the
/// lowest returns are replaced by neighbourhood medians before taking the
/// minimum, so that the estimate is not dragged down by the noise extremes,
/// and no refinement is attempted.
inline std::optional<SensedObstacle> nearest_from_scan(const Scan& s) {
  const std::size_t n = s.ranges.size();
  std::size_t best = n;
  for (std::size_t k = 0; k < n; ++k) {
    if (Scan::hit(s.ranges[k]) && (best == n || s.ranges[k] < s.ranges[best])) best = k;
  }
  if (best == n) return std::nullopt;

  SensedObstacle out;
  if (s.noise_stddev > 0.0) {
    constexpr std::size_t kCandidates = 16;
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < n; ++k) {
      if (Scan::hit(s.ranges[k])) order.push_back(k);
    }
    const std::size_t m = std::min(kCandidates, order.size());
    std::partial_sort(order.begin(), order.begin() + m, order.end(), [&](auto a, auto b) {
      return s.ranges[a] < s.ranges[b] || (s.ranges[a] == s.ranges[b] && a < b);
    });
    double best_value = INFINITY;
    for (std::size_t i = 0; i < m; ++i) {
      const double v = detail::neighbourhood_median(s, order[i]);
      if (v < best_value || (v == best_value && order[i] < best)) {
        best_value = v;
        best = order[i];
      }
    }
    out.d0 = best_value;
    out.eta = -s.directions[best];
    return out;
  }

  return detail::refine_minimum(best, n, s.origin.size(), s.directions[best],
                                [&](std::size_t k) { return s.ranges[k]; });
}

/// Same result as nearest_from_scan(scan(env, origin, cfg, seed)), computed
/// without tracing every ray when the sensor is noise-free: rays are visited
/// in order of a lower bound on their range (wall exit, bounding-sphere
/// entry) and the sweep stops once no remaining ray can beat the minimum.
inline std::optional<SensedObstacle> sense_nearest(const Environment& env, const Vector& origin,
                                                   const SensorConfig& cfg, std::uint64_t seed = 0) {
  if (cfg.noise_stddev > 0.0) return nearest_from_scan(scan(env, origin, cfg, seed));
  cfg.validate(env.dimension());
  if (!env.in_workspace(origin)) throw ConfigError("scan origin lies outside the workspace");
  const double start = env.clearance(origin);
  if (!(start > 0.0)) throw SafetyViolation("scan origin lies inside the obstacle region", start);

  const auto& dirs = detail::cached_directions(env.dimension(), cfg.ray_count);
  const std::size_t n = dirs.size();
  const auto& bounds = env.obstacle_bounds_list();
  std::vector<char> reachable(bounds.size(), 0);
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    reachable[i] = (origin - bounds[i].first).norm() - bounds[i].second <= cfg.max_range;
  }
  std::vector<Vector> rel(bounds.size());
  for (std::size_t i = 0; i < bounds.size(); ++i) rel[i] = bounds[i].first - origin;
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    double lb = detail::wall_exit(env.workspace(), origin, dirs[k]);
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      if (!reachable[i]) continue;
      const double along = rel[i].dot(dirs[k]);
      const double perp2 = std::max(0.0, rel[i].squaredNorm() - along * along);
      const double r2 = bounds[i].second * bounds[i].second;
      if (perp2 > r2 || along + bounds[i].second < 0.0) continue;
      lb = std::min(lb, std::max(0.0, along - std::sqrt(r2 - perp2)));
    }
    if (lb <= cfg.max_range) order.emplace_back(lb, k);
  }
  std::sort(order.begin(), order.end());

  std::vector<double> ranges(n, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> traced(n, 0);
  std::vector<char> mask;
  const auto range = [&](std::size_t k) {
    if (!traced[k]) {
      traced[k] = 1;
      detail::ray_mask(env, origin, dirs[k], cfg.max_range, mask);
      for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mask[i] && reachable[i];
      const auto hit = detail::trace(env, origin, dirs[k], cfg.max_range, &mask);
      if (hit && *hit <= cfg.max_range) ranges[k] = *hit;
    }
    return ranges[k];
  };
  std::size_t best = n;
  for (const auto& [lb, k] : order) {
    if (best < n && lb > ranges[best]) break;
    const double r = range(k);
    if (Scan::hit(r) && (best == n || r < ranges[best] || (r == ranges[best] && k < best))) best = k;
  }
  if (best == n) return std::nullopt;
  return detail::refine_minimum(best, n, env.dimension(), dirs[best], range);
}

/// CSV dump: `angle,range` in the plane, `azimuth,elevation,range` in 3D;
/// no-hit rays print NaN.
inline void write_scan_csv(std::ostream& os, const Scan& s) {
  const bool planar = s.origin.size() == 2;
  os << (planar ? "angle,range\n" : "azimuth,elevation,range\n");
  char buf[128];
  for (std::size_t k = 0; k < s.ranges.size(); ++k) {
    const Vector& d = s.directions[k];
    const double az = std::atan2(d[1], d[0]);
    if (planar) {
      std::snprintf(buf, sizeof(buf), "%.17g,", az);
    } else {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,", az, std::asin(std::clamp(d[2], -1.0, 1.0)));
    }
    os << buf;
    if (Scan::hit(s.ranges[k])) {
      std::snprintf(buf, sizeof(buf), "%.17g\n", s.ranges[k]);
      os << buf;
    } else {
      os << "NaN\n";
    }
  }
}

}  // namespace daf

#endif  // DAF_SENSING_HPP_
