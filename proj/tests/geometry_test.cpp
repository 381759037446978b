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

#include "daf/geometry.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "gtest/gtest.h"

namespace daf {
namespace {

Environment BallEnv(double epsilon = 0.6) {
  return Environment(UnboundedWorkspace{}, {make_ball(make_vector({0, 0}), 1.0)}, epsilon, 0.4);
}

// Independent oracle: dense sampling of the ellipse angle, then Newton on
// the angle for the squared-distance stationarity condition.
double EllipseDistanceOracle(double a, double b, const Eigen::Vector2d& p) {
  double best_th = 0.0, best = INFINITY;
  for (int k = 0; k < 200000; ++k) {
    const double th = 2.0 * std::numbers::pi * k / 200000.0;
    const double dist = std::hypot(a * std::cos(th) - p.x(), b * std::sin(th) - p.y());
    if (dist < best) {
      best = dist;
      best_th = th;
    }
  }
  double th = best_th;
  for (int it = 0; it < 50; ++it) {
    const double x = a * std::cos(th), y = b * std::sin(th);
    const double dx = -a * std::sin(th), dy = b * std::cos(th);
    const double g = (x - p.x()) * dx + (y - p.y()) * dy;
    const double h = dx * dx + dy * dy + (x - p.x()) * (-x) + (y - p.y()) * (-y);
    th -= g / h;
  }
  return std::hypot(a * std::cos(th) - p.x(), b * std::sin(th) - p.y());
}

TEST(Distance, BallExterior) {
  const auto env = BallEnv();
  EXPECT_DOUBLE_EQ(distance(env, make_vector({3, 0})), 2.0);
}

TEST(Distance, OnBoundaryIsZero) {
  const auto env = BallEnv();
  EXPECT_DOUBLE_EQ(distance(env, make_vector({1, 0})), 0.0);
  EXPECT_DOUBLE_EQ(distance(env, make_vector({0.2, 0.1})), 0.0);
}

TEST(Distance, EllipseOnAxis) {
  const Environment env(UnboundedWorkspace{},
                        {make_ellipsoid(make_vector({0, 0}), make_vector({2, 1}))}, 0.6, 0.4);
  const double oracle = EllipseDistanceOracle(2, 1, {4, 0});
  EXPECT_NEAR(oracle, 2.0, 1e-12);
  EXPECT_NEAR(distance(env, make_vector({4, 0})), 2.0, 1e-12);
}

TEST(Distance, EllipseMatchesOracleAtRandomPoints) {
  const double angle = 0.3;
  const Environment env(
      UnboundedWorkspace{},
      {make_ellipsoid(make_vector({1, -1}), make_vector({2, 0.7}), rotation_2d(angle))}, 0.6,
      0.4);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-6, 6);
  int checked = 0;
  while (checked < 20) {
    const Vector p = make_vector({u(rng), u(rng)});
    const double d = distance(env, p);
    if (d <= 0.0) continue;
    Eigen::Vector2d local = rotation_2d(angle).transpose() * (p - make_vector({1, -1}));
    EXPECT_NEAR(d, EllipseDistanceOracle(2, 0.7, local), 1e-9);
    ++checked;
  }
}

TEST(Distance, RejectsPointOutsideWorkspace) {
  const Environment env(BoxWorkspace{make_vector({-5, -5}), make_vector({5, 5})}, {}, 0.6, 0.4);
  EXPECT_THROW(distance(env, make_vector({6, 0})), ConfigError);
  EXPECT_THROW(query(env, make_vector({0, -5.5})), ConfigError);
}

TEST(Query, BallFieldAndHessian) {
  const auto env = BallEnv(0.6);
  const auto q = query(env, make_vector({3, 0}));
  EXPECT_DOUBLE_EQ(q.d0, 2.0);
  EXPECT_NEAR(q.d, 1.4, 1e-15);
  EXPECT_NEAR((q.eta - make_vector({1, 0})).norm(), 0.0, 1e-15);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(q.hessian);
  EXPECT_NEAR(eig.eigenvalues()[0], 0.0, 1e-12);
  EXPECT_NEAR(eig.eigenvalues()[1], 1.0 / 3.0, 1e-12);
  const Matrix fd = finite_difference_hessian(env, make_vector({3, 0}));
  EXPECT_LT((fd - q.hessian).norm(), 1e-6);
}

TEST(Query, BoxInteriorHasFlatHessian) {
  const Environment env(BoxWorkspace{make_vector({-5, -5}), make_vector({5, 5})}, {}, 0.6, 0.4);
  const auto q = query(env, make_vector({0.5, 0.2}));
  EXPECT_NEAR(q.d0, 4.5, 1e-15);
  EXPECT_NEAR((q.eta - make_vector({-1, 0})).norm(), 0.0, 1e-15);
  EXPECT_NEAR((q.foot - make_vector({5, 0.2})).norm(), 0.0, 1e-15);
  EXPECT_EQ(q.hessian.norm(), 0.0);
}

TEST(Query, EquidistantBallsAreAmbiguous) {
  const Environment env(UnboundedWorkspace{},
                        {make_ball(make_vector({-3, 0}), 1.0), make_ball(make_vector({3, 0}), 1.0)},
                        0.6, 0.4);
  EXPECT_THROW(query(env, make_vector({0, 1})), NonUniqueProjection);
  EXPECT_THROW(project_boundary(env, make_vector({0, 1})), NonUniqueProjection);
  EXPECT_NO_THROW(query(env, make_vector({0.1, 1})));
}

TEST(Query, InsideObstacleIsSafetyViolation) {
  const auto env = BallEnv();
  EXPECT_THROW(query(env, make_vector({0.5, 0})), SafetyViolation);
}

TEST(Query, EllipsoidHessianMatchesFiniteDifferences) {
  Matrix frame = Matrix::Identity(3, 3);
  const double c = std::cos(0.4), s = std::sin(0.4);
  frame << c, -s, 0, s, c, 0, 0, 0, 1;
  const Environment env(UnboundedWorkspace{},
                        {make_ellipsoid(make_vector({0, 0, 0}), make_vector({2, 1, 1.5}), frame)},
                        0.6, 0.4);
  for (const Vector& p : {make_vector({3, 1, 0.5}), make_vector({-1, 2.2, -1}),
                          make_vector({0.3, -0.2, 2.5})}) {
    const auto q = query(env, p);
    const Matrix fd = finite_difference_hessian(env, p);
    EXPECT_LT((fd - q.hessian).norm(), 1e-6) << p.transpose();
    EXPECT_LT((q.hessian * q.eta).norm(), 1e-9);
  }
}

TEST(ProjectBoundary, Examples) {
  EXPECT_NEAR((project_boundary(BallEnv(), make_vector({3, 0})) - make_vector({1, 0})).norm(), 0.0,
              1e-15);
  const Environment box(BoxWorkspace{make_vector({-5, -5}), make_vector({5, 5})}, {}, 0.6, 0.4);
  EXPECT_NEAR((project_boundary(box, make_vector({4, 0})) - make_vector({5, 0})).norm(), 0.0,
              1e-15);
}

std::vector<Eigen::Vector2d> Blob() {
  std::vector<Eigen::Vector2d> pts;
  const std::vector<double> radii = {1.0, 1.3, 0.9, 1.2, 1.1, 0.8, 1.25, 1.0};
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const double th = 2.0 * std::numbers::pi * k / radii.size();
    pts.emplace_back(radii[k] * std::cos(th), radii[k] * std::sin(th));
  }
  return pts;
}

TEST(ProjectBoundary, SplineMatchesDensePolylineArgmin) {
  const Environment env(UnboundedWorkspace{}, {make_spline(Blob())}, 0.6, 0.4);
  const auto& curve = *std::get<Spline2D>(env.obstacles()[0]).curve;
  // Oracle: uniform dense sampling of the curve, then local golden-section
  // refinement on the parameter.
  const auto oracle = [&](const Eigen::Vector2d& p) {
    const int n = 400000;
    double best = INFINITY, best_u = 0;
    for (int k = 0; k < n; ++k) {
      const double u = curve.period() * k / n;
      const double dist = (curve.position(u) - p).norm();
      if (dist < best) {
        best = dist;
        best_u = u;
      }
    }
    double lo = best_u - curve.period() / n, hi = best_u + curve.period() / n;
    for (int it = 0; it < 100; ++it) {
      const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
      if ((curve.position(m1) - p).norm() < (curve.position(m2) - p).norm()) hi = m2;
      else lo = m1;
    }
    return Eigen::Vector2d(curve.position(0.5 * (lo + hi)));
  };
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> r(1.6, 3.5), th(0, 2 * std::numbers::pi);
  for (int i = 0; i < 10; ++i) {
    const double rr = r(rng), tt = th(rng);
    const Vector p = make_vector({rr * std::cos(tt), rr * std::sin(tt)});
    if (distance(env, p) <= 0.0) continue;
    const Vector foot = project_boundary(env, p);
    const Eigen::Vector2d expect = oracle(Eigen::Vector2d(p[0], p[1]));
    EXPECT_LT((foot - Vector(expect)).norm(), 1e-6);
    EXPECT_NEAR((p - foot).norm(), distance(env, p), 1e-12);
  }
}

TEST(Invariants, GradientMatchesNormal) {
  const Environment env(
      BoxWorkspace{make_vector({-10, -10}), make_vector({10, 10})},
      {make_ball(make_vector({-4, 3}), 1.5),
       make_ellipsoid(make_vector({3, -2}), make_vector({2.0, 1.0}), rotation_2d(0.7)),
       make_spline([] {
         auto b = Blob();
         for (auto& p : b) p += Eigen::Vector2d(3, 5);
         return b;
       }())},
      0.6, 0.4);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-9, 9);
  int checked = 0;
  while (checked < 300) {
    const Vector p = make_vector({u(rng), u(rng)});
    const auto near = env.nearest(p);
    if (near.d0 < 0.05 || near.ambiguous) continue;
    const bool spline = near.source == 2;
    const double h = spline ? 1e-4 : 1e-5;
    Vector grad(2);
    bool skip = false;
    for (int i = 0; i < 2; ++i) {
      Vector a = p, b = p;
      a[i] += h;
      b[i] -= h;
      const auto na = env.nearest(a), nb = env.nearest(b);
      if (na.source != near.source || nb.source != near.source) skip = true;
      grad[i] = (na.d0 - nb.d0) / (2 * h);
    }
    if (skip) continue;
    EXPECT_LT((grad - near.eta).norm(), spline ? 1e-4 : 1e-6) << p.transpose();
    const auto q = query(env, p);
    EXPECT_EQ(q.d, distance(env, p) - env.epsilon());
    EXPECT_LT((q.hessian - q.hessian.transpose()).norm(), 1e-12);
    if (!spline) {
      EXPECT_LT((q.hessian * q.eta).norm(), 1e-6);
    }
    ++checked;
  }
}

TEST(Invariants, BallHessianEigenvalues3D) {
  const Environment env(UnboundedWorkspace{}, {make_ball(make_vector({1, 2, 3}), 0.7)}, 0.6, 0.4);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  for (int i = 0; i < 100; ++i) {
    Vector dir = make_vector({n(rng), n(rng), n(rng)}).normalized();
    const Vector p = make_vector({1, 2, 3}) + (0.8 + 3.0 * std::abs(n(rng))) * dir;
    const auto q = query(env, p);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(q.hessian);
    const double expect = 1.0 / (p - make_vector({1, 2, 3})).norm();
    EXPECT_NEAR(eig.eigenvalues()[0], 0.0, 1e-9);
    EXPECT_NEAR(eig.eigenvalues()[1], expect, 1e-9);
    EXPECT_NEAR(eig.eigenvalues()[2], expect, 1e-9);
  }
}

TEST(Invariants, DistanceIsOneLipschitzAlongSegments) {
  const Environment env(BoxWorkspace{make_vector({-6, -6}), make_vector({6, 6})},
                        {make_spline(Blob()), make_ball(make_vector({3.5, 3.5}), 1.0)}, 0.6, 0.4);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.9, 5.9);
  for (int s = 0; s < 50; ++s) {
    const Vector a = make_vector({u(rng), u(rng)});
    const Vector b = make_vector({u(rng), u(rng)});
    double prev = distance(env, a);
    Vector prev_p = a;
    for (int k = 1; k <= 100; ++k) {
      const Vector p = a + (b - a) * (k / 100.0);
      const double d = distance(env, p);
      EXPECT_LE(std::abs(d - prev), (p - prev_p).norm() + 1e-12);
      prev = d;
      prev_p = p;
    }
  }
}

TEST(Validate, TwoBallsWithWideGapPass) {
  const double eps = 0.6;
  const Environment env(UnboundedWorkspace{},
                        {make_ball(make_vector({0, 0}), 1.0),
                         make_ball(make_vector({2.0 + 3 * eps, 0}), 1.0)},
                        eps, 0.4);
  const auto report = validate_environment(env);
  EXPECT_TRUE(report.passed()) << report.find("pairwise_clearance")->detail;
}

TEST(Validate, TwoBallsWithNarrowGapFail) {
  const double eps = 0.6;
  const Environment env(UnboundedWorkspace{},
                        {make_ball(make_vector({0, 0}), 1.0),
                         make_ball(make_vector({2.0 + eps, 0}), 1.0)},
                        eps, 0.4);
  const auto report = validate_environment(env);
  EXPECT_FALSE(report.passed());
  EXPECT_FALSE(report.find("pairwise_clearance")->passed);
}

TEST(Validate, RadiusMarginCheck) {
  const auto ok = validate_environment(BallEnv(0.6));
  EXPECT_TRUE(ok.find("robot_radius_below_epsilon")->passed);
  const Environment bad(UnboundedWorkspace{}, {make_ball(make_vector({0, 0}), 1.0)}, 0.3, 0.4);
  EXPECT_FALSE(validate_environment(bad).find("robot_radius_below_epsilon")->passed);
}

TEST(Validate, DeclaredBoundsAndWalls) {
  const Environment env(BoxWorkspace{make_vector({-3, -3}), make_vector({3, 3})},
                        {make_ball(make_vector({1.5, 0}), 1.0)}, 0.6, 0.4, 0.5, std::nullopt);
  const auto report = validate_environment(env);
  EXPECT_FALSE(report.find("epsilon_below_declared_bounds")->passed);
  EXPECT_FALSE(report.find("pairwise_clearance")->passed);  // 0.5 from the wall
}

TEST(Validate, ConcavePocketFailsUniquenessProbe) {
  // A star-shaped spline with a tight inward notch: offsets at clearance
  // epsilon are occluded by the neighbouring lobes.
  std::vector<Eigen::Vector2d> pts;
  for (int k = 0; k < 12; ++k) {
    const double th = 2.0 * std::numbers::pi * k / 12;
    const double r = k % 2 == 0 ? 2.0 : 1.0;
    pts.emplace_back(r * std::cos(th), r * std::sin(th));
  }
  const Environment env(UnboundedWorkspace{}, {make_spline(pts)}, 0.6, 0.4);
  EXPECT_FALSE(validate_environment(env).find("projection_uniqueness")->passed);
}

TEST(Environment, RejectsInvalidConstruction) {
  EXPECT_THROW(Environment(UnboundedWorkspace{}, {}, 0.6, 0.4), ConfigError);
  EXPECT_THROW(make_ball(make_vector({0, 0}), 0.0), ConfigError);
  EXPECT_THROW(make_ellipsoid(make_vector({0, 0}), make_vector({1, -1})), ConfigError);
  std::vector<Eigen::Vector2d> bowtie = {{0, 0}, {1, 1}, {1, 0}, {0, 1}};
  EXPECT_THROW(make_spline(bowtie), ConfigError);
}

}  // namespace
}  // namespace daf
