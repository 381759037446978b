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

#ifndef DAF_SPLINE_CURVE_HPP_
#define DAF_SPLINE_CURVE_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "daf/types.hpp"

namespace daf {

/// Closed, C2, periodic cubic interpolating spline through a list of
/// control points, parameterized uniformly by u in [0, K) where K is the
/// number of control points (segment i spans [i, i + 1)).
///
/// The curve is sampled once into an adaptive polyline whose chord error is
/// bounded by `chord_tolerance`. Distance queries search that polyline
/// through a two-level bounding-circle hierarchy and are then refined by
/// Newton iterations on the curve parameter.
class ClosedSpline2D {
 public:
  using Point = Eigen::Vector2d;

  struct Projection {
    double u = 0.0;
    Point foot = Point::Zero();
    double distance = std::numeric_limits<double>::infinity();
    // Best foot found in a different basin of the distance function along
    // the curve, when its distance is close to the optimum.
    std::optional<Point> alternative_foot;
    double alternative_distance = std::numeric_limits<double>::infinity();
  };

  explicit ClosedSpline2D(std::vector<Point> control_points,
                          double chord_tolerance = 1e-6)
      : points_(std::move(control_points)), chord_tolerance_(chord_tolerance) {
    require(points_.size() >= 3, "spline obstacle needs at least 3 control points");
    for (const auto& p : points_) require(p.allFinite(), "spline control point is not finite");
    require(polygon_is_simple(points_), "spline control polygon is not a simple closed curve");
    solve_second_derivatives();
    build_polyline();
    build_chunks();
    build_ray_node(0, vertices_.size());
    double area = 0.0;
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      const Point& a = vertices_[i];
      const Point& b = vertices_[(i + 1) % vertices_.size()];
      area += a.x() * b.y() - b.x() * a.y();
    }
    counter_clockwise_ = area > 0.0;
  }

  std::size_t segment_count() const { return points_.size(); }
  double period() const { return static_cast<double>(points_.size()); }
  const std::vector<Point>& control_points() const { return points_; }
  const std::vector<Point>& polyline() const { return vertices_; }
  const std::vector<double>& polyline_parameters() const { return params_; }
  const Point& bounding_center() const { return center_; }
  double bounding_radius() const { return radius_; }

  Point position(double u) const {
    auto [i, s] = locate(u);
    const std::size_t j = (i + 1) % points_.size();
    const double r = 1.0 - s;
    return points_[i] * r + points_[j] * s +
           second_[i] * ((r * r * r - r) / 6.0) + second_[j] * ((s * s * s - s) / 6.0);
  }

  Point derivative(double u) const {
    auto [i, s] = locate(u);
    const std::size_t j = (i + 1) % points_.size();
    const double r = 1.0 - s;
    return points_[j] - points_[i] + second_[i] * ((1.0 - 3.0 * r * r) / 6.0) +
           second_[j] * ((3.0 * s * s - 1.0) / 6.0);
  }

  Point second_derivative(double u) const {
    auto [i, s] = locate(u);
    const std::size_t j = (i + 1) % points_.size();
    return second_[i] * (1.0 - s) + second_[j] * s;
  }

  /// Unit normal pointing out of the enclosed region.
  Point outward_normal(double u) const {
    Point t = derivative(u).normalized();
    Point n(t.y(), -t.x());
    return counter_clockwise_ ? n : Point(-n);
  }

  /// Signed curvature, positive where the enclosed region is locally convex.
  double curvature(double u) const {
    const Point d1 = derivative(u);
    const Point d2 = second_derivative(u);
    const double cross = d1.x() * d2.y() - d1.y() * d2.x();
    const double k = cross / std::pow(d1.norm(), 3);
    return counter_clockwise_ ? k : -k;
  }

  /// Point-in-region test by crossing number against the polyline.
  bool contains(const Point& p) const {
    if ((p - center_).norm() > radius_) return false;
    bool inside = false;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point& a = vertices_[i];
      const Point& b = vertices_[j];
      if ((a.y() > p.y()) != (b.y() > p.y())) {
        const double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
        if (p.x() < x) inside = !inside;
      }
    }
    return inside;
  }

  /// Conservative lower bound on the distance from p to the curve.
  double lower_bound(const Point& p) const {
    return std::max(0.0, (p - center_).norm() - radius_);
  }

  /// Nearest point on the curve. Returns early with an infinite distance if
  /// the curve is provably farther than `cutoff`.
  Projection project(const Point& p,
                     double cutoff = std::numeric_limits<double>::infinity()) const {
    Projection out;
    if (lower_bound(p) > cutoff) return out;

    // Alternatives within this slack of the polyline optimum are refined.
    const double slack = 4.0 * chord_tolerance_ + 1e-9;

    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(chunks_.size());
    for (std::size_t c = 0; c < chunks_.size(); ++c) {
      const double lb = (p - chunks_[c].center).norm() - chunks_[c].radius;
      if (lb <= cutoff) order.emplace_back(lb, c);
    }
    if (order.empty()) return out;
    std::sort(order.begin(), order.end());

    const std::size_t n = vertices_.size();
    std::vector<double> seg_dist;
    std::vector<std::size_t> seg_index;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_seg = 0;
    double best_t = 0.0;
    for (const auto& [lb, c] : order) {
      if (lb > best + slack) break;
      for (std::size_t k = chunks_[c].first; k < chunks_[c].last; ++k) {
        double t;
        const double dist = segment_distance(p, vertices_[k], vertices_[(k + 1) % n], &t);
        seg_dist.push_back(dist);
        seg_index.push_back(k);
        if (dist < best) {
          best = dist;
          best_seg = k;
          best_t = t;
        }
      }
    }
    if (!std::isfinite(best)) return out;

    const auto refine = [&](std::size_t seg, double t) {
      const double ua = params_[seg];
      double ub = params_[(seg + 1) % n];
      if (ub <= ua) ub += period();
      return newton_refine(p, ua + t * (ub - ua), ua, ub);
    };
    const Projection primary = refine(best_seg, best_t);
    out = primary;

    // Distinct near-optimal basins: polyline segments within the slack,
    // grouped into cyclically contiguous runs. Every run other than the one
    // holding the optimum is refined separately.
    std::vector<std::pair<std::size_t, double>> near;
    for (std::size_t i = 0; i < seg_dist.size(); ++i) {
      if (seg_dist[i] <= best + slack) near.emplace_back(seg_index[i], seg_dist[i]);
    }
    std::sort(near.begin(), near.end());
    std::vector<std::vector<std::pair<std::size_t, double>>> runs;
    for (const auto& entry : near) {
      if (runs.empty() || entry.first > runs.back().back().first + 2) runs.emplace_back();
      runs.back().push_back(entry);
    }
    if (runs.size() > 1 && runs.front().front().first + n <= runs.back().back().first + 2) {
      runs.front().insert(runs.front().end(), runs.back().begin(), runs.back().end());
      runs.pop_back();
    }
    for (const auto& run : runs) {
      const bool holds_best = std::any_of(run.begin(), run.end(), [&](const auto& e) {
        return e.first == best_seg;
      });
      if (holds_best) continue;
      const auto it = std::min_element(run.begin(), run.end(), [](const auto& a, const auto& b) {
        return a.second < b.second;
      });
      double t;
      segment_distance(p, vertices_[it->first], vertices_[(it->first + 1) % n], &t);
      const Projection alt = refine(it->first, t);
      if (alt.distance < out.alternative_distance) {
        out.alternative_distance = alt.distance;
        out.alternative_foot = alt.foot;
      }
    }
    return out;
  }

  /// Smallest t in [0, max_t] with origin + t*dir on the curve, for an
  /// origin outside the curve. The polyline crossing is refined by bisection
  /// on the curve parameter.
  std::optional<double> ray_intersection(const Point& origin, const Point& dir, double max_t) const {
    const auto misses = [&](const Point& c, double r, double limit) {
      const Point rel = c - origin;
      const double along = std::clamp(rel.dot(dir), 0.0, limit);
      return (rel - along * dir).norm() > r || rel.norm() - r > limit;
    };
    if (misses(center_, radius_, max_t)) return std::nullopt;
    const std::size_t n = vertices_.size();
    const double slack = 1e-12;
    double best = max_t;
    std::optional<std::pair<std::size_t, double>> hit;
    std::size_t stack[64];
    std::size_t top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const RayNode& node = ray_nodes_[stack[--top]];
      if (misses(node.center, node.radius, best)) continue;
      if (node.left == 0) {
        for (std::size_t k = node.first; k < node.last; ++k) {
          const Point a = vertices_[k] - origin;
          const Point e = vertices_[(k + 1) % n] - vertices_[k];
          const double den = cross(dir, e);
          if (den == 0.0) continue;
          const double s = -cross(dir, a) / den;
          if (s < -slack || s > 1.0 + slack) continue;
          const double t = cross(a, e) / den;
          if (t >= 0.0 && t <= best) {
            best = t;
            hit = {k, s};
          }
        }
        continue;
      }
      // Nearer child last so it is popped first.
      const double dl = (ray_nodes_[node.left].center - origin).dot(dir);
      const double dr = (ray_nodes_[node.right].center - origin).dot(dir);
      stack[top++] = dl < dr ? node.right : node.left;
      stack[top++] = dl < dr ? node.left : node.right;
    }
    if (!hit) return std::nullopt;

    const double ua = params_[hit->first];
    double ub = params_[(hit->first + 1) % n];
    if (ub <= ua) ub += period();
    const auto f = [&](double u) { return cross(dir, position(u) - origin); };
    double lo = ua, hi = ub;
    const double flo = f(lo);
    if ((flo < 0.0) == (f(hi) < 0.0)) return best;  // grazing chord; keep the polyline value
    // Newton from the chord estimate, falling back to bisection when a step
    // leaves the bracket.
    double u = ua + std::clamp(hit->second, 0.0, 1.0) * (ub - ua);
    for (int it = 0; it < 60; ++it) {
      const double fu = f(u);
      if (fu == 0.0) break;
      if ((fu < 0.0) == (flo < 0.0)) {
        lo = u;
      } else {
        hi = u;
      }
      const double df = cross(dir, derivative(u));
      double next = df != 0.0 ? u - fu / df : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - u) < 1e-15 * std::max(1.0, std::abs(u)) || hi - lo < 1e-15) {
        u = next;
        break;
      }
      u = next;
    }
    const double t = (position(u) - origin).dot(dir);
    if (t < 0.0 || t > max_t) return std::nullopt;
    return t;
  }

  /// Distance from an exterior point, without the basin bookkeeping of
  /// project(). Far from the curve this is the polyline distance less the
  /// chord tolerance (a lower bound); within 1e-5 it is Newton-refined.
  double distance(const Point& p, double cutoff = std::numeric_limits<double>::infinity()) const {
    if (lower_bound(p) > cutoff) return std::numeric_limits<double>::infinity();
    const std::size_t n = vertices_.size();
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_seg = 0;
    double best_t = 0.0;
    const auto scan_chunk = [&](const Chunk& c) {
      for (std::size_t k = c.first; k < c.last; ++k) {
        double t;
        const double dist = segment_distance(p, vertices_[k], vertices_[(k + 1) % n], &t);
        if (dist < best) {
          best = dist;
          best_seg = k;
          best_t = t;
        }
      }
    };
    std::size_t first = 0;
    double first_lb = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < chunks_.size(); ++c) {
      const double lb = (p - chunks_[c].center).norm() - chunks_[c].radius;
      if (lb < first_lb) {
        first_lb = lb;
        first = c;
      }
    }
    if (first_lb > cutoff) return std::numeric_limits<double>::infinity();
    scan_chunk(chunks_[first]);
    for (std::size_t c = 0; c < chunks_.size(); ++c) {
      if (c == first) continue;
      if ((p - chunks_[c].center).norm() - chunks_[c].radius < best) scan_chunk(chunks_[c]);
    }
    if (best > 1e-5) return best - chord_tolerance_;
    const double ua = params_[best_seg];
    double ub = params_[(best_seg + 1) % n];
    if (ub <= ua) ub += period();
    return newton_refine(p, ua + best_t * (ub - ua), ua, ub).distance;
  }

  /// True when no two non-adjacent polyline segments intersect.
  bool polyline_is_simple() const { return polygon_is_simple(vertices_); }

 private:
  struct Chunk {
    std::size_t first = 0;  // segment indices [first, last)
    std::size_t last = 0;
    Point center = Point::Zero();
    double radius = 0.0;
  };

  static constexpr std::size_t kChunkSegments = 24;

  // Bounding-circle tree over contiguous polyline ranges, used by ray
  // queries. Node 0 is the root; left == 0 marks a leaf.
  struct RayNode {
    Point center = Point::Zero();
    double radius = 0.0;
    std::size_t first = 0;
    std::size_t last = 0;
    std::size_t left = 0;
    std::size_t right = 0;
  };
  static constexpr std::size_t kRayLeafSegments = 8;

  std::size_t build_ray_node(std::size_t first, std::size_t last) {
    const std::size_t n = vertices_.size();
    RayNode node;
    node.first = first;
    node.last = last;
    Point lo = vertices_[first], hi = vertices_[first];
    for (std::size_t k = first; k <= last; ++k) {
      lo = lo.cwiseMin(vertices_[k % n]);
      hi = hi.cwiseMax(vertices_[k % n]);
    }
    node.center = 0.5 * (lo + hi);
    for (std::size_t k = first; k <= last; ++k) {
      node.radius = std::max(node.radius, (vertices_[k % n] - node.center).norm());
    }
    node.radius += 2.0 * chord_tolerance_;
    const std::size_t index = ray_nodes_.size();
    ray_nodes_.push_back(node);
    if (last - first > kRayLeafSegments) {
      const std::size_t mid = first + (last - first) / 2;
      const std::size_t left = build_ray_node(first, mid);
      const std::size_t right = build_ray_node(mid, last);
      ray_nodes_[index].left = left;
      ray_nodes_[index].right = right;
    }
    return index;
  }

  std::pair<std::size_t, double> locate(double u) const {
    const double k = period();
    u = std::fmod(u, k);
    if (u < 0.0) u += k;
    std::size_t i = static_cast<std::size_t>(std::floor(u));
    if (i >= points_.size()) i = points_.size() - 1;
    return {i, u - static_cast<double>(i)};
  }

  static bool segments_cross(const Point& a, const Point& b, const Point& c, const Point& d) {
    const auto orient = [](const Point& p, const Point& q, const Point& r) {
      return (q.x() - p.x()) * (r.y() - p.y()) - (q.y() - p.y()) * (r.x() - p.x());
    };
    const double o1 = orient(a, b, c), o2 = orient(a, b, d);
    const double o3 = orient(c, d, a), o4 = orient(c, d, b);
    return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 &&
           o3 != 0 && o4 != 0;
  }

  static bool polygon_is_simple(const std::vector<Point>& poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        if (segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
      }
    }
    return true;
  }

  void solve_second_derivatives() {
    const Eigen::Index k = static_cast<Eigen::Index>(points_.size());
    Matrix system = Matrix::Zero(k, k);
    Eigen::MatrixXd rhs(k, 2);
    for (Eigen::Index i = 0; i < k; ++i) {
      const Eigen::Index prev = (i + k - 1) % k;
      const Eigen::Index next = (i + 1) % k;
      system(i, prev) += 1.0;
      system(i, i) += 4.0;
      system(i, next) += 1.0;
      rhs.row(i) = 6.0 * (points_[next] - 2.0 * points_[i] + points_[prev]).transpose();
    }
    const Eigen::MatrixXd m = system.partialPivLu().solve(rhs);
    second_.resize(points_.size());
    for (Eigen::Index i = 0; i < k; ++i) second_[i] = m.row(i).transpose();
  }

  double chord_error(double u0, double u1) const {
    const Point a = position(u0);
    const Point b = position(u1);
    const Point m = position(0.5 * (u0 + u1));
    const Point ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (m - a).norm();
    const double t = std::clamp((m - a).dot(ab) / len2, 0.0, 1.0);
    return (m - (a + t * ab)).norm();
  }

  void subdivide(double u0, double u1, int depth) {
    if (depth < 24 && chord_error(u0, u1) > chord_tolerance_) {
      const double um = 0.5 * (u0 + u1);
      subdivide(u0, um, depth + 1);
      subdivide(um, u1, depth + 1);
      return;
    }
    params_.push_back(u0);
  }

  void build_polyline() {
    constexpr int kSeed = 8;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      for (int s = 0; s < kSeed; ++s) {
        subdivide(i + static_cast<double>(s) / kSeed, i + static_cast<double>(s + 1) / kSeed, 0);
      }
    }
    vertices_.reserve(params_.size());
    for (double u : params_) vertices_.push_back(position(u));
  }

  void build_chunks() {
    const std::size_t n = vertices_.size();
    Point lo = vertices_.front(), hi = vertices_.front();
    for (const auto& v : vertices_) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    center_ = 0.5 * (lo + hi);
    radius_ = 0.0;
    for (const auto& v : vertices_) radius_ = std::max(radius_, (v - center_).norm());
    radius_ += 2.0 * chord_tolerance_;

    for (std::size_t first = 0; first < n; first += kChunkSegments) {
      Chunk c;
      c.first = first;
      c.last = std::min(n, first + kChunkSegments);
      Point clo = vertices_[first], chi = vertices_[first];
      for (std::size_t k = first; k <= c.last; ++k) {
        clo = clo.cwiseMin(vertices_[k % n]);
        chi = chi.cwiseMax(vertices_[k % n]);
      }
      c.center = 0.5 * (clo + chi);
      for (std::size_t k = first; k <= c.last; ++k) {
        c.radius = std::max(c.radius, (vertices_[k % n] - c.center).norm());
      }
      c.radius += 2.0 * chord_tolerance_;
      chunks_.push_back(c);
    }
  }

  static double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

  static double segment_distance(const Point& p, const Point& a, const Point& b, double* t_out) {
    const Point ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    *t_out = t;
    return (p - (a + t * ab)).norm();
  }

  // Minimizes |C(u) - p|^2 near u0; the bracket is widened by one polyline
  // segment on each side.
  Projection newton_refine(const Point& p, double u0, double ua, double ub) const {
    const double span = ub - ua;
    const double lo = ua - span;
    const double hi = ub + span;
    double u = u0;
    for (int it = 0; it < 50; ++it) {
      const Point c = position(u);
      const Point d1 = derivative(u);
      const Point d2 = second_derivative(u);
      const Point r = c - p;
      const double g = r.dot(d1);
      const double h = d1.squaredNorm() + r.dot(d2);
      double step = h > 0.0 ? -g / h : (g > 0.0 ? -0.5 * span : 0.5 * span);
      double next = std::clamp(u + step, lo, hi);
      if (std::abs(next - u) < 1e-15 * std::max(1.0, std::abs(u))) {
        u = next;
        break;
      }
      u = next;
    }
    Projection out;
    out.u = std::fmod(u, period());
    if (out.u < 0.0) out.u += period();
    out.foot = position(out.u);
    out.distance = (p - out.foot).norm();
    return out;
  }

  std::vector<Point> points_;
  std::vector<Point> second_;
  double chord_tolerance_;
  std::vector<double> params_;
  std::vector<Point> vertices_;
  std::vector<Chunk> chunks_;
  std::vector<RayNode> ray_nodes_;
  Point center_ = Point::Zero();
  double radius_ = 0.0;
  bool counter_clockwise_ = true;
};

}  // namespace daf

#endif  // DAF_SPLINE_CURVE_HPP_
