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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "daf/analysis.hpp"
#include "daf/geometry.hpp"
#include "daf/scenario.hpp"
#include "daf/simulation.hpp"
#include "json.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;
};

int g_failures = 0;

void report(int id, const std::string& title, const Verdict& v) {
  std::printf("%s  criterion %d: %s\n      %s\n", v.pass ? "PASS" : "FAIL", id, title.c_str(),
              v.detail.c_str());
  std::fflush(stdout);
  if (!v.pass) ++g_failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

struct Batch {
  daf::Scenario scenario;
  std::vector<daf::Trajectory> runs;
  double seconds = 0.0;
};

// Oracle-mode DAF runs with dt = 1e-3. Every step is recorded so that the
// energy bookkeeping is not limited by the sample spacing.
Batch run_safety_batch(const std::string& name) {
  Batch b{daf::load_scenario(name), {}, 0.0};
  b.scenario.mode = daf::SensingMode::kOracle;
  b.scenario.sim.dt = 1e-3;
  b.scenario.sim.record_stride = 1;
  const auto controller = b.scenario.make_controller("daf");
  const auto start = Clock::now();
  for (const auto& init : b.scenario.initial_states) {
    b.runs.push_back(daf::simulate(*b.scenario.env, controller, init, b.scenario.sim));
  }
  b.seconds = seconds_since(start);
  return b;
}

Verdict criterion_safety(const std::vector<Batch>& batches) {
  Verdict v;
  double total = 0.0, min_d = INFINITY;
  std::size_t runs = 0, violations = 0;
  for (const auto& b : batches) {
    total += b.seconds;
    for (const auto& t : b.runs) {
      ++runs;
      bool ok = t.outcome != daf::Outcome::kSafetyViolation;
      for (const auto& s : t.samples) {
        min_d = std::min(min_d, s.d);
        ok = ok && s.d > 0.0;
      }
      violations += !ok;
    }
  }
  v.pass = violations == 0 && total < 60.0;
  v.detail = fmt("%zu runs, %zu with a violation, min margin d = %.3e, runtime %.1f s (limit 60 s)",
                 runs, violations, min_d, total);
  return v;
}

Verdict criterion_lyapunov(const std::vector<Batch>& batches) {
  Verdict v;
  double worst_rise = -INFINITY, worst_budget = 0.0;
  std::size_t runs = 0;
  for (const auto& b : batches) {
    for (const auto& t : b.runs) {
      const auto budget = daf::energy_budget(t, *b.scenario.daf);
      worst_rise = std::max(worst_rise, budget.max_increase);
      worst_budget = std::max(worst_budget, budget.relative_error());
      ++runs;
    }
  }
  v.pass = worst_rise <= 1e-8 && worst_budget <= 0.01;
  v.detail = fmt("%zu runs, largest sample-to-sample rise of L %.3e (limit 1e-8), "
                 "worst energy budget error %.3e (limit 1e-2)",
                 runs, worst_rise, worst_budget);
  return v;
}

Verdict criterion_convergence(const std::vector<Batch>& batches) {
  Verdict v;
  for (const auto& b : batches) {
    const auto& sc = b.scenario;
    const std::size_t random = sc.initial_states.size() - sc.explicit_states;
    std::size_t converged = 0;
    for (std::size_t i = sc.explicit_states; i < sc.initial_states.size(); ++i) {
      const auto& t = b.runs[i];
      const auto& last = t.samples.back();
      converged += t.outcome == daf::Outcome::kConverged &&
                   (last.p - sc.target).norm() < 1e-2 && last.v.norm() < 1e-3;
    }
    v.pass = v.pass && random >= 10 && converged == random;
    v.detail += fmt("%s%s: %zu/%zu random starts converged", v.detail.empty() ? "" : "; ",
                    sc.name.c_str(), converged, random);
  }
  return v;
}

daf::Environment gradient_env(int dim) {
  using daf::Vector;
  std::vector<daf::Obstacle> obs;
  if (dim == 2) {
    obs.push_back(daf::make_ball(Vector{{-2.0, 1.5}}, 1.0));
    obs.push_back(daf::make_ball(Vector{{2.5, 2.0}}, 0.6));
    obs.push_back(daf::make_ellipsoid(Vector{{1.0, -2.0}}, Vector{{2.0, 0.7}},
                                      daf::rotation_2d(0.6)));
    obs.push_back(daf::make_ellipsoid(Vector{{-2.5, -2.5}}, Vector{{0.5, 1.5}}));
  } else {
    obs.push_back(daf::make_ball(Vector{{-2.0, 1.5, 0.5}}, 1.0));
    obs.push_back(daf::make_ball(Vector{{2.5, 2.0, -1.0}}, 0.8));
    const Eigen::AngleAxisd rot(0.7, Eigen::Vector3d(1.0, 2.0, -1.0).normalized());
    obs.push_back(daf::make_ellipsoid(Vector{{1.0, -2.0, 0.0}}, Vector{{2.0, 0.7, 1.2}},
                                      daf::Matrix(rot.toRotationMatrix())));
    obs.push_back(daf::make_ellipsoid(Vector{{-2.5, -2.5, 1.5}}, Vector{{0.5, 1.5, 0.9}}));
  }
  return daf::Environment(daf::UnboundedWorkspace{}, std::move(obs), 0.3, 0.1);
}

Verdict criterion_gradient() {
  Verdict v;
  constexpr double h = 1e-6;
  double worst_grad = 0.0, worst_eig = 0.0;
  std::size_t points = 0, balls = 0;
  std::mt19937_64 rng(20261014);
  for (int dim : {2, 3}) {
    const auto env = gradient_env(dim);
    std::uniform_real_distribution<double> coord(-5.0, 5.0);
    std::size_t accepted = 0;
    while (accepted < 500) {
      daf::Vector p(dim);
      for (int i = 0; i < dim; ++i) p[i] = coord(rng);
      if (!(env.nearest(p).d0 > 1e-3)) continue;
      daf::DistanceQuery q;
      try {
        q = daf::query(env, p);
      } catch (const daf::NonUniqueProjection&) {
        continue;
      }
      daf::Vector grad(dim);
      bool same_feature = true;
      for (int i = 0; i < dim; ++i) {
        daf::Vector a = p, b = p;
        a[i] += h;
        b[i] -= h;
        const auto na = env.nearest(a), nb = env.nearest(b);
        same_feature = same_feature && na.source == q.source && nb.source == q.source;
        grad[i] = (na.d0 - nb.d0) / (2.0 * h);
      }
      if (!same_feature) continue;
      ++accepted;
      worst_grad = std::max(worst_grad, (grad - q.eta).norm());
      const auto& o = env.obstacles()[static_cast<std::size_t>(q.source)];
      if (const auto* ball = std::get_if<daf::Ball>(&o)) {
        ++balls;
        const double expected = 1.0 / (p - ball->center).norm();
        Eigen::SelfAdjointEigenSolver<daf::Matrix> es(q.hessian);
        const auto ev = es.eigenvalues();  // ascending: 0 along eta, then 1/|p-c|
        worst_eig = std::max(worst_eig, std::abs(ev[0]));
        for (int i = 1; i < dim; ++i) worst_eig = std::max(worst_eig, std::abs(ev[i] - expected));
      }
    }
    points += accepted;
  }
  v.pass = points >= 1000 && balls > 0 && worst_grad < 1e-6 && worst_eig < 1e-9;
  v.detail = fmt("%zu points (%zu next to balls), worst |FD grad - eta| %.3e (limit 1e-6), "
                 "worst ball eigenvalue error %.3e (limit 1e-9)",
                 points, balls, worst_grad, worst_eig);
  return v;
}

Verdict criterion_gamma() {
  Verdict v;
  // One-sided difference quotients with Richardson extrapolation, taken
  // strictly inside each branch.
  const auto one_sided = [](const std::function<double(double)>& f, double x, double sign) {
    const double h = 1e-5 * sign;
    const auto dq = [&](double step) { return (f(x + step) - f(x)) / step; };
    return 2.0 * dq(h / 2.0) - dq(h);
  };
  double worst = 0.0;
  for (const auto& [e1, e2] : {std::pair{0.5, 1.4}, std::pair{2.5, 3.5}}) {
    const auto phi = daf::build_phi(e1, e2);
    const auto inner = [](double z) { return 1.0 / z; };
    const auto blend = [&](double z) { return phi(z); };
    const auto outer = [](double) { return 0.0; };
    // Values at the knots must agree as well.
    const double jump1 = std::abs(inner(e1) - blend(e1));
    const double jump2 = std::abs(blend(e2) - outer(e2));
    const double at1 = std::abs(one_sided(inner, e1, -1.0) - one_sided(blend, e1, 1.0));
    const double at2 = std::abs(one_sided(blend, e2, -1.0) - one_sided(outer, e2, 1.0));
    // The library derivative just left of and at each knot.
    const double dg1 = std::abs(daf::gamma_derivative(e1 * (1 - 1e-15), phi) -
                                daf::gamma_derivative(e1, phi));
    const double dg2 = std::abs(daf::gamma_derivative(e2 * (1 - 1e-15), phi) -
                                daf::gamma_derivative(e2, phi));
    const double w = std::max({at1, at2, jump1, jump2, dg1, dg2});
    worst = std::max(worst, w);
    v.detail += fmt("%s(%.1f, %.1f): slope mismatch %.2e at eps1, %.2e at eps2, value jump %.1e",
                    v.detail.empty() ? "" : "; ", e1, e2, std::max(at1, dg1), std::max(at2, dg2),
                    std::max(jump1, jump2));
  }
  v.pass = worst < 1e-6;
  return v;
}

Verdict criterion_dichotomy() {
  Verdict v;
  for (const auto& [name, should_escape] :
       {std::pair{std::string("bracket_k068"), true}, std::pair{std::string("bracket_k093"), false}}) {
    const auto sc = daf::load_scenario(name);
    const auto& p = *sc.daf;
    const auto reports = daf::find_equilibria(*sc.env, p);
    // The bracketed equilibrium is the one with curvature-distance product 0.8.
    std::size_t bracket = reports.size();
    double best = INFINITY;
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const double gap = std::abs(reports[i].max_eigenvalue() * reports[i].lambda - 0.8);
      if (gap < best) best = gap, bracket = i;
    }
    if (bracket == reports.size() || best > 1e-6) {
      v.pass = false;
      v.detail += name + ": no equilibrium with lambda_H * lambda = 0.8; ";
      continue;
    }
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const auto probe = daf::escape_probe(*sc.env, reports[i], p, sc.probe.sigma, sc.probe.config);
      const bool flag = daf::curvature_condition(reports[i], p.k1, p.k2);
      mismatches += flag != probe.escaped;
      if (i == bracket) {
        v.pass = v.pass && probe.escaped == should_escape;
        v.detail += fmt("k2/k1=%.2f: bracket point %s (expected %s), flag %s, excursion %.2e; ",
                        p.k2 / p.k1, probe.escaped ? "escaped" : "trapped",
                        should_escape ? "escape" : "trapped", flag ? "unstable" : "stable",
                        probe.max_excursion);
      }
    }
    v.pass = v.pass && mismatches == 0;
    v.detail += fmt("%zu equilibria, %zu flag/outcome mismatches; ", reports.size(), mismatches);
  }
  return v;
}

Verdict criterion_stall() {
  Verdict v;
  const auto sc = daf::load_scenario("stall2d");
  const auto& p = *sc.daf;
  const auto t = daf::simulate(*sc.env, sc.make_controller("daf"), sc.initial_states.front(), sc.sim);
  if (t.outcome != daf::Outcome::kStalled) {
    v.pass = false;
    v.detail = std::string("run ended as ") + daf::to_string(t.outcome);
    return v;
  }
  const double residual = daf::equilibrium_residual(*sc.env, t.stall_point, sc.target);
  const double lambda = (t.stall_point - sc.target).norm();
  const double expected = -lambda * p.k1 / p.k3;
  const double phi = daf::terminal_phi_average(t, p);
  const double rel = std::abs(phi - expected) / std::abs(expected);
  v.pass = residual < 1e-3 && rel < 0.05;
  v.detail = fmt("stalled at t = %.2f s, residual %.2e (limit 1e-3), terminal mean Phi %.5f vs "
                 "-lambda k1/k3 = %.5f, relative error %.2e (limit 5e-2)",
                 t.end_time, residual, phi, expected, rel);
  return v;
}

Verdict criterion_lidar() {
  Verdict v;
  auto sc = daf::load_scenario("paper2d");
  sc.sim.dt = 1e-3;
  sc.sensor.ray_count = 720;
  sc.sensor.noise_stddev = 0.0;
  const auto controller_for = [&](daf::SensingMode mode) {
    auto copy = sc;
    copy.mode = mode;
    return copy.make_controller("daf");
  };
  const auto oracle = controller_for(daf::SensingMode::kOracle);
  const auto lidar = controller_for(daf::SensingMode::kLidar);
  double worst = 0.0;
  std::size_t violations = 0;
  for (std::size_t i = 0; i < sc.explicit_states; ++i) {
    const auto a = daf::simulate(*sc.env, oracle, sc.initial_states[i], sc.sim);
    const auto b = daf::simulate(*sc.env, lidar, sc.initial_states[i], sc.sim);
    violations += (a.outcome == daf::Outcome::kSafetyViolation) +
                  (b.outcome == daf::Outcome::kSafetyViolation);
    // Runs may end a few samples apart; past its end a run holds its last state.
    const std::size_t n = std::max(a.samples.size(), b.samples.size());
    for (std::size_t k = 0; k < n; ++k) {
      const auto& pa = a.samples[std::min(k, a.samples.size() - 1)].p;
      const auto& pb = b.samples[std::min(k, b.samples.size() - 1)].p;
      worst = std::max(worst, (pa - pb).norm());
    }
  }
  v.pass = worst < 5e-2 && violations == 0;
  v.detail = fmt("%zu starts, max position deviation %.3e m (limit 5e-2), %zu safety violations",
                 sc.explicit_states, worst, violations);
  return v;
}

Verdict criterion_compare() {
  Verdict v;
  const auto dir = std::filesystem::temp_directory_path() / "daf_acceptance_compare";
  std::filesystem::remove_all(dir);
  const std::string cmd = std::string("\"") + DAF_CLI_PATH + "\" compare comparison2d --no-plot --out-dir \"" +
                          dir.string() + "\" > \"" + (dir.string() + ".log") + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    v.pass = false;
    v.detail = "compare command failed, see " + dir.string() + ".log";
    return v;
  }
  std::ifstream in(dir / "compare.json");
  const auto report = nlohmann::json::parse(in);
  double worst_ratio = 0.0, worst_speed = 0.0;
  std::size_t runs = 0;
  for (const auto& run : report.at("runs")) {
    const auto& d = run.at("daf").at("metrics");
    const auto& a = run.at("apf").at("metrics");
    const double du = d.at("peak_accel"), au = a.at("peak_accel");
    const double dv = d.at("peak_speed"), av = a.at("peak_speed");
    const double speed_gap = std::abs(dv - av) / std::max(dv, av);
    v.pass = v.pass && du < au && speed_gap <= 0.2;
    worst_ratio = std::max(worst_ratio, du / au);
    worst_speed = std::max(worst_speed, speed_gap);
    ++runs;
  }
  v.pass = v.pass && runs > 0;
  v.detail = fmt("%zu runs, largest DAF/APF peak |u| ratio %.3f (must be < 1), largest peak speed "
                 "gap %.1f%% (limit 20%%)",
                 runs, worst_ratio, 100.0 * worst_speed);
  return v;
}

void guarded(int id, const std::string& title, const std::function<Verdict()>& f) {
  const auto start = Clock::now();
  Verdict v;
  try {
    v = f();
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail = std::string("exception: ") + e.what();
  }
  v.detail += fmt(" [%.1f s]", seconds_since(start));
  report(id, title, v);
}

}  // namespace

int main() {
  std::vector<Batch> batches;
  const auto start = Clock::now();
  try {
    batches.push_back(run_safety_batch("paper2d"));
    batches.push_back(run_safety_batch("paper3d"));
  } catch (const std::exception& e) {
    std::printf("error while running the safety batches: %s\n", e.what());
    batches.clear();
  }
  const double batch_time = seconds_since(start);
  const auto from_batches = [&](auto f) {
    return [&, f]() {
      if (batches.size() != 2) return Verdict{false, "safety batches did not run"};
      return f(batches);
    };
  };
  guarded(1, "safety / forward invariance", from_batches(criterion_safety));
  guarded(2, "Lyapunov decrease and energy budget", from_batches(criterion_lyapunov));
  guarded(3, "convergence from random safe starts", from_batches(criterion_convergence));
  guarded(4, "distance gradient and Hessian", criterion_gradient);
  guarded(5, "gamma regularity at eps1 and eps2", criterion_gamma);
  guarded(6, "curvature / instability dichotomy", criterion_dichotomy);
  guarded(7, "stall diagnostics", criterion_stall);
  guarded(8, "lidar vs oracle fidelity", criterion_lidar);
  guarded(9, "DAF vs APF comparison", criterion_compare);
  std::printf("shared batch runtime %.1f s; %d of 9 criteria failed\n", batch_time, g_failures);
  return g_failures == 0 ? 0 : 1;
}
