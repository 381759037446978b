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

#include "daf/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "gtest/gtest.h"

namespace daf {
namespace {

DafParams Gains(double k1, double k2, double k3, const Vector& target) {
  DafParams p;
  p.k1 = k1;
  p.k2 = k2;
  p.k3 = k3;
  p.target = target;
  return p;
}

Environment Disk(const Vector& c, double r, double eps = 0.6) {
  return Environment(UnboundedWorkspace{}, {make_ball(c, r)}, eps, 0.4);
}

// Residual of the alignment condition, computed from the geometry directly.
double CollinearityResidual(const Environment& env, const Vector& p, const Vector& pd) {
  const auto near = env.nearest(p);
  const Vector r = p - pd;
  return (r - r.norm() * near.eta).norm();
}

TEST(FindEquilibria, DiskShadowPoint) {
  const Vector c = make_vector({1, 2}), pd = make_vector({-3, -1});
  const auto env = Disk(c, 1.0);
  const auto reps = find_equilibria(env, Gains(10, 5, 10, pd));
  ASSERT_EQ(reps.size(), 1u);
  const Vector expect = c + 1.6 * (c - pd).normalized();
  EXPECT_LT((reps[0].p_star - expect).norm(), 1e-12);
  EXPECT_LT(CollinearityResidual(env, reps[0].p_star, pd), 1e-9);
  EXPECT_NEAR(reps[0].lambda, (c - pd).norm() + 1.6, 1e-12);
  EXPECT_EQ(reps[0].obstacle, 0);
  EXPECT_NEAR(reps[0].alpha_phi, -reps[0].lambda * 10 / 10, 1e-12);
  ASSERT_EQ(reps[0].eigenvalues.size(), 2u);
  EXPECT_NEAR(reps[0].eigenvalues[0], 0.0, 1e-12);
  EXPECT_NEAR(reps[0].max_eigenvalue(), 1.0 / 1.6, 1e-12);
}

TEST(FindEquilibria, DiskTargetOnNormalLine) {
  const auto env = Disk(make_vector({0, 0}), 1.0);
  const auto reps = find_equilibria(env, Gains(10, 5, 10, make_vector({-4, 0})));
  ASSERT_EQ(reps.size(), 1u);
  EXPECT_LT((reps[0].p_star - make_vector({1.6, 0})).norm(), 1e-15);
}

TEST(FindEquilibria, NoObstacleInfluenceMeansNone) {
  const Environment env(BoxWorkspace{make_vector({-5, -5}), make_vector({5, 5})}, {}, 0.6, 0.4);
  EXPECT_TRUE(find_equilibria(env, Gains(10, 5, 10, make_vector({1, 1}))).empty());
}

// Brute-force oracle: sign changes of cross(q - pd, n) along a dense
// parameterization of the offset ellipse, kept where (q - pd).n > 0.
int EllipseOracleCount(double a, double b, double eps, const Eigen::Vector2d& pd) {
  const int n = 200000;
  int count = 0;
  const auto f = [&](double th) {
    const Eigen::Vector2d y(a * std::cos(th), b * std::sin(th));
    const Eigen::Vector2d nrm = Eigen::Vector2d(std::cos(th) / a, std::sin(th) / b).normalized();
    const Eigen::Vector2d q = y + eps * nrm;
    const Eigen::Vector2d r = q - pd;
    return std::pair{r.x() * nrm.y() - r.y() * nrm.x(), r.dot(nrm)};
  };
  auto prev = f(0.0);
  for (int k = 1; k <= n; ++k) {
    const auto cur = f(2 * std::numbers::pi * k / n);
    if ((cur.first < 0) != (prev.first < 0) && cur.second > 0) ++count;
    prev = cur;
  }
  return count;
}

TEST(FindEquilibria, EllipseMatchesOracleAndResidual) {
  const double a = 0.5, b = 1.3, eps = 0.6;
  const Environment env(UnboundedWorkspace{},
                        {make_ellipsoid(make_vector({0, 0}), make_vector({a, b}))}, eps, 0.4);
  for (const auto& pd : {make_vector({-2, 0}), make_vector({-2.5, 0.7}), make_vector({0.3, -3})}) {
    const auto params = Gains(10, 5, 10, pd);
    const auto reps = find_equilibria(env, params);
    EXPECT_EQ(static_cast<int>(reps.size()), EllipseOracleCount(a, b, eps, {pd[0], pd[1]}))
        << pd.transpose();
    for (const auto& r : reps) {
      EXPECT_LT(CollinearityResidual(env, r.p_star, pd), 1e-9);
      EXPECT_NEAR(distance(env, r.p_star) - eps, 0.0, 1e-9);
      const auto q = query(env, r.p_star);
      EXPECT_LT((q.hessian * q.eta).norm(), 1e-6);
      EXPECT_GT(r.lambda, 0.0);
      EXPECT_EQ(r.unstable, r.max_eigenvalue() > r.condition_rhs);
    }
  }
}

TEST(FindEquilibria, RotatedEllipsoid3D) {
  Matrix frame(3, 3);
  const double c = std::cos(0.5), s = std::sin(0.5);
  frame << c, 0, -s, 0, 1, 0, s, 0, c;
  const Vector center = make_vector({1, -1, 2});
  const Environment env(UnboundedWorkspace{},
                        {make_ellipsoid(center, make_vector({1.0, 1.5, 0.8}), frame)}, 0.5, 0.4);
  const Vector pd = make_vector({-4, 1, 0});
  const auto reps = find_equilibria(env, Gains(3, 4, 100, pd));
  ASSERT_FALSE(reps.empty());
  for (const auto& r : reps) {
    EXPECT_LT(CollinearityResidual(env, r.p_star, pd), 1e-9);
    EXPECT_NEAR(distance(env, r.p_star) - 0.5, 0.0, 1e-9);
  }
}

TEST(FindEquilibria, SplineBlob) {
  std::vector<Eigen::Vector2d> pts;
  const std::vector<double> radii = {1.0, 1.2, 1.1, 0.9, 1.15, 1.05};
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const double th = 2 * std::numbers::pi * k / radii.size();
    pts.emplace_back(radii[k] * std::cos(th), radii[k] * std::sin(th));
  }
  const Environment env(UnboundedWorkspace{}, {make_spline(pts)}, 0.6, 0.4);
  const Vector pd = make_vector({-4, 0.5});
  const auto reps = find_equilibria(env, Gains(10, 5, 10, pd));
  ASSERT_GE(reps.size(), 1u);
  for (const auto& r : reps) {
    EXPECT_LT(CollinearityResidual(env, r.p_star, pd), 1e-9);
    EXPECT_NEAR(distance(env, r.p_star) - 0.6, 0.0, 1e-9);
    EXPECT_GT((r.p_star - pd).dot(r.eta), 0.0);
  }
}

EquilibriumReport HandReport(double eig, double lambda) {
  EquilibriumReport r;
  r.lambda = lambda;
  r.eigenvalues = {0.0, eig};
  r.principal_dirs = {make_vector({1, 0}), make_vector({0, 1})};
  return r;
}

TEST(CurvatureCondition, ThresholdExamples) {
  const auto r = HandReport(0.4, 2.0);
  EXPECT_TRUE(curvature_condition(r, 1.0, 0.68));   // rhs 0.34
  EXPECT_FALSE(curvature_condition(r, 1.0, 0.93));  // rhs 0.465
  EXPECT_TRUE(curvature_condition(r, 10.0, 6.8));
  const auto flat = HandReport(0.0, 2.0);
  for (double ratio : {0.01, 0.5, 1.0, 5.0}) EXPECT_FALSE(curvature_condition(flat, 1.0, ratio));
  // Above k2/k1 = 1 only the geometric threshold 1/lambda matters.
  EXPECT_EQ(curvature_condition(HandReport(0.45, 2.0), 1.0, 2.0),
            curvature_condition(HandReport(0.45, 2.0), 1.0, 50.0));
}

TEST(DistanceDynamics, TangentialAndAtRest) {
  const auto env = Disk(make_vector({0, 0}), 1.0);
  const auto params = Gains(10, 5, 10, make_vector({-4, 1}));
  const Vector p = make_vector({2.5, 0});
  const auto q = query(env, p);
  const Vector vt = make_vector({0, 1.5});
  const auto t = distance_dynamics(p, vt, q, params);
  EXPECT_EQ(t.d_dot, 0.0);
  EXPECT_EQ(t.Phi, 0.0);
  EXPECT_DOUBLE_EQ(t.d_ddot, -t.alpha);
  EXPECT_NEAR(t.alpha, 10 * 6.5 - 1.5 * 1.5 / 2.5, 1e-12);
  const auto r = distance_dynamics(p, Vector::Zero(2), q, params);
  EXPECT_DOUBLE_EQ(r.d_ddot, -10.0 * q.eta.dot(p - params.target));
}

TEST(DistanceDynamics, MatchesFiniteDifferencesAlongTrajectory) {
  const auto env = Disk(make_vector({0, 0}), 1.0);
  const auto params = Gains(10, 5, 10, make_vector({-4, 1.2}));
  SimConfig cfg;
  cfg.dt = 1e-4;
  cfg.t_max = 2.0;
  const auto traj = simulate(env, Controller(params), {make_vector({3, -0.4}), make_vector({-1, 0})},
                             cfg);
  const auto& s = traj.samples;
  int checked = 0;
  for (std::size_t i = 1; i + 1 < s.size(); i += 97) {
    const double fd = (s[i + 1].d - 2 * s[i].d + s[i - 1].d) / (cfg.dt * cfg.dt);
    const auto dyn = distance_dynamics(s[i].p, s[i].v, query(env, s[i].p), params);
    EXPECT_NEAR(fd, dyn.d_ddot, 1e-3 * std::max(1.0, std::abs(dyn.d_ddot))) << s[i].t;
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(EscapeProbe, ZeroSigmaHoldsEquilibrium) {
  const auto env = Disk(make_vector({0, 0}), 1.0);
  const auto params = Gains(1, 1, 10, make_vector({-2.4, 0}));
  const auto reps = find_equilibria(env, params);
  ASSERT_EQ(reps.size(), 1u);
  const auto res = escape_probe(env, reps[0], params, 0.0);
  EXPECT_FALSE(res.escaped);
  for (const auto& smp : res.trajectory.samples) EXPECT_EQ(smp.p, reps[0].p_star);
  EXPECT_EQ(res.trajectory.samples.back().t, ProbeConfig{}.sim.t_max);
}

// Fixed lambda = 8 (the target stays outside every eroded disk). A disk
// always satisfies the curvature condition because lambda exceeds the
// radius of the eroded disk, so every probe escapes.
TEST(EscapeProbe, DiskFamilySweep) {
  for (double rho : {1.5, 2.0, 2.5, 3.0}) {
    const double eps = 0.6;
    const auto env = Disk(make_vector({0, 0}), rho - eps, eps);
    const auto params = Gains(1, 1, 10, make_vector({-(8.0 - rho), 0}));
    const auto reps = find_equilibria(env, params);
    ASSERT_EQ(reps.size(), 1u);
    EXPECT_NEAR(reps[0].lambda, 8.0, 1e-12);
    const bool flag = curvature_condition(reps[0], params.k1, params.k2);
    ProbeConfig probe;
    probe.sim.t_max = 90;  // the robot lingers on the disk before lifting off
    probe.stop_on_escape = false;
    const auto res = escape_probe(env, reps[0], params, 1e-2, probe);
    EXPECT_TRUE(flag) << rho;
    EXPECT_EQ(res.escaped, flag) << rho;
    EXPECT_EQ(res.trajectory.outcome, Outcome::kConverged) << rho;
    for (std::size_t i = 0; i < 3 && i < res.W.size(); ++i) EXPECT_GE(res.W[i], 0.0);
  }
}

TEST(EscapeProbe, StopsOnceEscaped) {
  const auto env = Disk(make_vector({0, 0}), 1.0, 0.6);
  const auto params = Gains(1, 1, 10, make_vector({-6.4, 0}));
  const auto reps = find_equilibria(env, params);
  ASSERT_EQ(reps.size(), 1u);
  ProbeConfig probe;
  probe.sim.t_max = 90;
  const auto res = escape_probe(env, reps[0], params, 1e-2, probe);
  EXPECT_TRUE(res.escaped);
  EXPECT_EQ(res.trajectory.outcome, Outcome::kTimeout);
  EXPECT_LT(res.trajectory.end_time, probe.sim.t_max);
  // Only the last recorded sample may lie outside the escape radius.
  const auto& s = res.trajectory.samples;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    EXPECT_LE((s[i].p - reps[0].p_star).norm(), probe.escape_radius * res.sigma);
  }
}

TEST(EscapeProbe, FlatPlateTraps) {
  // A thin, wide plate: the curvature at the shadow point is ~a/b^2.
  const Environment env(UnboundedWorkspace{},
                        {make_ellipsoid(make_vector({0, 0}), make_vector({0.2, 20.0}))}, 0.6, 0.4);
  const auto params = Gains(1, 1, 10, make_vector({-2, 0}));
  const auto reps = find_equilibria(env, params);
  // The shadow point on the axis, plus one point near each end of the plate.
  ASSERT_EQ(reps.size(), 3u);
  const auto it = std::find_if(reps.begin(), reps.end(),
                               [](const auto& r) { return std::abs(r.p_star[1]) < 1e-9; });
  ASSERT_NE(it, reps.end());
  EXPECT_FALSE(curvature_condition(*it, params.k1, params.k2));
  const auto res = escape_probe(env, *it, params, 1e-2);
  EXPECT_FALSE(res.escaped);
  EXPECT_NE(res.trajectory.outcome, Outcome::kConverged);
  EXPECT_NE(res.trajectory.outcome, Outcome::kSafetyViolation);
}

TEST(Metrics, StationaryAndStraightLine) {
  Trajectory still;
  still.target = make_vector({1, 1});
  still.pos_tol = 1e-2;
  still.epsilon = 0.6;
  for (int i = 0; i < 5; ++i) {
    still.samples.push_back({0.1 * i, make_vector({1, 1}), Vector::Zero(2), Vector::Zero(2), 1.0,
                             0.0, make_vector({1, 0}), 1.0});
  }
  const auto m = metrics(still);
  EXPECT_EQ(m.path_length, 0.0);
  EXPECT_EQ(m.peak_accel, 0.0);
  EXPECT_EQ(m.peak_speed, 0.0);
  EXPECT_DOUBLE_EQ(m.min_clearance, 1.6);
  EXPECT_EQ(m.settle_time, 0.0);

  Trajectory line;
  line.target = make_vector({2, 0});
  line.pos_tol = 1.5e-2;
  line.epsilon = 0.6;
  for (int i = 0; i <= 200; ++i) {
    const double t = 0.01 * i;
    line.samples.push_back({t, make_vector({t, 0}), make_vector({1, 0}), Vector::Zero(2),
                            3.0 - t, 0.0, make_vector({1, 0}), 3.0 - t});
  }
  const auto ml = metrics(line);
  EXPECT_NEAR(ml.path_length, 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(ml.peak_speed, 1.0);
  EXPECT_NEAR(ml.min_clearance, 1.6, 1e-12);
  EXPECT_NEAR(ml.settle_time, 1.99, 1e-12);
}

TEST(Metrics, NeverSettledIsInfinite) {
  Trajectory t;
  t.target = make_vector({5, 5});
  t.pos_tol = 1e-2;
  t.samples.push_back({0.0, make_vector({0, 0}), Vector::Zero(2), Vector::Zero(2), 1, 0, {}, 1});
  EXPECT_TRUE(std::isinf(metrics(t).settle_time));
}

TEST(Stall, PhiApproachesAlphaPhi) {
  const auto env = Disk(make_vector({0, 0}), 1.0);
  const auto params = Gains(1, 1, 10, make_vector({-1.4, 0}));
  SimConfig cfg;
  cfg.dt = 1e-4;
  cfg.record_stride = 10;
  const auto traj = simulate(env, Controller(params), {make_vector({4, 0}), Vector::Zero(2)}, cfg);
  ASSERT_EQ(traj.outcome, Outcome::kStalled);
  const auto reps = find_equilibria(env, params);
  ASSERT_EQ(reps.size(), 1u);
  EXPECT_LT(equilibrium_residual(env, traj.stall_point, params.target), 1e-3);
  const double phi = terminal_phi_average(traj, params);
  EXPECT_NEAR(phi / reps[0].alpha_phi, 1.0, 0.05);
  const auto budget = energy_budget(traj, params);
  EXPECT_LT(budget.max_increase, 1e-8);
  EXPECT_LT(budget.relative_error(), 0.01);
}

}  // namespace
}  // namespace daf
