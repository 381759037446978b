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

#ifndef DAF_SIMULATION_HPP_
#define DAF_SIMULATION_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "daf/control.hpp"
#include "daf/geometry.hpp"
#include "daf/sensing.hpp"
#include "daf/types.hpp"

namespace daf {

struct State {
  Vector p;
  Vector v;
};

enum class SensingMode { kOracle, kLidar };

/// Feedback law plus the way it perceives the obstacles.
class Controller {
 public:
  using Law = std::variant<DafParams, ApfParams>;

  struct Evaluation {
    Vector u;
    double d = 0.0;   // true clearance margin d0 - epsilon
    Vector eta;       // normal used by the law
    double d_used = 0.0;  // margin seen by the law (sensed in lidar mode)
    double stiffness = 0.0;  // fastest local rate of the closed loop, 1/s
  };

  explicit Controller(Law law, SensingMode mode = SensingMode::kOracle,
                      SensorConfig sensor = {}, std::uint64_t seed = 0)
      : law_(std::move(law)), mode_(mode), sensor_(sensor), seed_(seed) {
    std::visit([](const auto& p) { p.validate(); }, law_);
    if (const auto* daf = std::get_if<DafParams>(&law_)) phi_ = daf->phi();
  }

  static Controller daf(DafParams params) { return Controller(std::move(params)); }
  static Controller apf(ApfParams params) { return Controller(std::move(params)); }

  const Law& law() const { return law_; }
  SensingMode mode() const { return mode_; }
  const SensorConfig& sensor() const { return sensor_; }
  std::uint64_t seed() const { return seed_; }
  bool is_daf() const { return std::holds_alternative<DafParams>(law_); }

  const Vector& target() const {
    return std::visit([](const auto& p) -> const Vector& { return p.target; }, law_);
  }
  /// Position gain of the quadratic energy L = k |p - p_d|^2 / 2 + |v|^2 / 2.
  double position_gain() const {
    if (const auto* daf = std::get_if<DafParams>(&law_)) return daf->k1;
    return std::get<ApfParams>(law_).ka;
  }

  /// Evaluates the law at (p, v). `stream` selects the sensor-noise stream.
  /// Throws SafetyViolation when the true clearance margin is not positive.
  Evaluation evaluate(const Environment& env, const Vector& p, const Vector& v,
                      std::uint64_t stream = 0) const {
    Evaluation out;
    if (!all_finite(p) || !all_finite(v)) {
      throw SafetyViolation("state is no longer finite", -INFINITY);
    }
    if (!env.in_workspace(p)) throw SafetyViolation("robot left the workspace", -env.epsilon());
    Proximity prox;
    if (mode_ == SensingMode::kOracle) {
      const auto near = env.nearest(p);
      out.d = near.d0 - env.epsilon();
      if (!(out.d > 0.0)) throw SafetyViolation("clearance margin reached zero", out.d);
      prox = {out.d, near.eta};
    } else {
      out.d = env.clearance(p) - env.epsilon();
      if (!(out.d > 0.0)) throw SafetyViolation("clearance margin reached zero", out.d);
      if (const auto sensed = sense_nearest(env, p, sensor_, mix(seed_, stream))) {
        prox = {sensed->d0 - env.epsilon(), sensed->eta};
      } else {
        prox = {std::numeric_limits<double>::infinity(), Vector::Zero(p.size())};
      }
    }
    out.eta = prox.eta;
    out.d_used = prox.d;
    if (const auto* daf = std::get_if<DafParams>(&law_)) {
      out.u = daf_control(p, v, prox, *daf, phi_);
      out.stiffness = std::sqrt(daf->k1) + daf->k2;
      if (std::isfinite(prox.d)) {
        // Normal damping k3 gamma(d) and the spring k3 gamma'(d) d' it
        // carries while the margin changes.
        const double vn = std::abs(prox.eta.dot(v));
        out.stiffness += daf->k3 * gamma(prox.d, phi_) +
                         std::sqrt(daf->k3 * std::abs(gamma_derivative(prox.d, phi_)) * vn);
      }
    } else {
      const auto& apf = std::get<ApfParams>(law_);
      out.u = apf_control(p, v, prox, apf);
      out.stiffness = std::sqrt(apf.ka) + apf.kv;
      if (prox.d <= apf.eps2) {
        const double d = prox.d;
        const double k = apf.kr * (3.0 / (d * d * d * d) - 2.0 / (apf.eps2 * d * d * d));
        out.stiffness += std::sqrt(std::max(k, 0.0));
      }
    }
    return out;
  }

 private:
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  Law law_;
  SensingMode mode_;
  SensorConfig sensor_;
  std::uint64_t seed_;
  SplinePhi phi_;
};

struct SimConfig {
  double dt = 1e-3;
  double t_max = 60.0;
  double pos_tol = 1e-2;
  double vel_tol = 1e-3;
  int record_stride = 1;
  // Stall detection: |v| < vel_tol held for stall_window seconds, the
  // target direction aligned with the normal to within stall_residual, and
  // clearance margin below stall_clearance.
  double stall_window = 1.0;
  double stall_residual = 1e-3;
  double stall_clearance = 0.05;
  // A step whose local rate times dt exceeds stiffness_limit is split into
  // equal RK4 substeps (at most max_substeps). Samples stay on the dt grid.
  double stiffness_limit = 0.5;
  int max_substeps = 4096;

  void validate() const {
    require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
    require(t_max > 0.0 && std::isfinite(t_max), "t_max must be positive");
    require(pos_tol > 0.0 && vel_tol > 0.0, "tolerances must be positive");
    require(record_stride >= 1, "record_stride must be at least 1");
    require(stall_window >= 0.0 && stall_residual > 0.0, "stall settings must be positive");
    require(stiffness_limit > 0.0, "stiffness_limit must be positive");
    require(max_substeps >= 1 && max_substeps <= 65536, "max_substeps must be in [1, 65536]");
  }
};

struct Sample {
  double t = 0.0;
  Vector p;
  Vector v;
  Vector u;
  double d = 0.0;  // true clearance margin
  double L = 0.0;
  Vector eta;      // normal used by the controller at this sample
  double d_used = 0.0;
};

enum class Outcome { kConverged, kStalled, kSafetyViolation, kTimeout };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::kConverged: return "Converged";
    case Outcome::kStalled: return "Stalled";
    case Outcome::kSafetyViolation: return "SafetyViolation";
    case Outcome::kTimeout: return "Timeout";
  }
  return "Unknown";
}

struct Trajectory {
  std::vector<Sample> samples;
  Outcome outcome = Outcome::kTimeout;
  double end_time = 0.0;
  Vector stall_point;         // set for kStalled
  double violation_time = 0;  // set for kSafetyViolation
  int violation_stage = 0;    // RK4 stage (1..4) that hit the boundary
  std::string violation_message;
  // Context needed to interpret samples.
  Vector target;
  double epsilon = 0.0;
  double pos_tol = 0.0;
  double position_gain = 0.0;
  std::uint64_t evaluations = 0;
};

/// Thrown by step(): the controller failed at one RK4 stage.
class StageViolation : public SafetyViolation {
 public:
  StageViolation(const SafetyViolation& cause, int stage)
      : SafetyViolation(cause.what(), cause.clearance()), stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

namespace detail {

inline State rk4_step(const Environment& env, const Controller& controller, const State& s,
                      double dt, const Vector& u1, std::uint64_t stream) {
  const auto stage = [&](const Vector& p, const Vector& v, int index) {
    try {
      return controller.evaluate(env, p, v, stream + static_cast<std::uint64_t>(index)).u;
    } catch (const SafetyViolation& e) {
      throw StageViolation(e, index);
    }
  };
  const Vector& a1 = u1;
  const Vector p2 = s.p + 0.5 * dt * s.v;
  const Vector v2 = s.v + 0.5 * dt * a1;
  const Vector a2 = stage(p2, v2, 2);
  const Vector p3 = s.p + 0.5 * dt * v2;
  const Vector v3 = s.v + 0.5 * dt * a2;
  const Vector a3 = stage(p3, v3, 3);
  const Vector p4 = s.p + dt * v3;
  const Vector v4 = s.v + dt * a3;
  const Vector a4 = stage(p4, v4, 4);
  State next;
  next.p = s.p + (dt / 6.0) * (s.v + 2.0 * v2 + 2.0 * v3 + v4);
  next.v = s.v + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  return next;
}

inline double alignment_residual(const Vector& p, const Vector& target, const Vector& eta) {
  const Vector r = p - target;
  const double len = r.norm();
  if (len == 0.0 || eta.size() != r.size()) return std::numeric_limits<double>::infinity();
  return (r / len - eta).norm();
}

}  // namespace detail

/// One classical Runge-Kutta step of p' = v, v' = u(p, v), with the
/// controller evaluated (and the clearance checked) at every stage.
inline State step(const Environment& env, const Controller& controller, const State& s,
                  double dt, std::uint64_t stream = 0) {
  Vector u1;
  try {
    u1 = controller.evaluate(env, s.p, s.v, stream + 1).u;
  } catch (const SafetyViolation& e) {
    throw StageViolation(e, 1);
  }
  return detail::rk4_step(env, controller, s, dt, u1, stream);
}

/// Called once per step with the time and state; returning false ends the
/// run there with outcome kTimeout.
using StepObserver = std::function<bool(double, const State&)>;

/// Integrates the closed loop from `init` until convergence, a stall, a
/// safety violation, t_max or a stop request from `observer`.
inline Trajectory simulate(const Environment& env, const Controller& controller,
                           const State& init, const SimConfig& cfg,
                           const StepObserver& observer = {}) {
  cfg.validate();
  require(init.p.size() == env.dimension() && init.v.size() == env.dimension(),
          "initial state dimension mismatch");
  require(all_finite(init.p) && all_finite(init.v), "initial state must be finite");
  require(env.in_workspace(init.p), "initial position lies outside the workspace");
  {
    const double d = env.nearest(init.p).d0 - env.epsilon();
    require(d > 0.0, "initial position is not in the interior of the practical free space");
  }

  Trajectory traj;
  traj.target = controller.target();
  traj.epsilon = env.epsilon();
  traj.pos_tol = cfg.pos_tol;
  traj.position_gain = controller.position_gain();
  const double k = controller.position_gain();
  const auto energy = [&](const State& s) {
    return 0.5 * k * (s.p - traj.target).squaredNorm() + 0.5 * s.v.squaredNorm();
  };

  State s = init;
  const auto max_steps = static_cast<std::uint64_t>(std::ceil(cfg.t_max / cfg.dt - 1e-9));
  std::optional<double> slow_since;
  for (std::uint64_t n = 0;; ++n) {
    const double t = static_cast<double>(n) * cfg.dt;
    const std::uint64_t stream = 4 * n;
    Controller::Evaluation eval;
    try {
      eval = controller.evaluate(env, s.p, s.v, stream + 1);
      ++traj.evaluations;
    } catch (const SafetyViolation& e) {
      traj.outcome = Outcome::kSafetyViolation;
      traj.violation_time = t;
      traj.violation_stage = 1;
      traj.violation_message = e.what();
      traj.end_time = t;
      return traj;
    }
    const auto sample = [&]() {
      traj.samples.push_back({t, s.p, s.v, eval.u, eval.d, energy(s), eval.eta, eval.d_used});
    };

    const double dist = (s.p - traj.target).norm();
    const double speed = s.v.norm();
    if (speed < cfg.vel_tol) {
      if (!slow_since) slow_since = t;
    } else {
      slow_since.reset();
    }
    const bool aligned =
        eval.d < cfg.stall_clearance &&
        detail::alignment_residual(s.p, traj.target, eval.eta) < cfg.stall_residual;

    if (dist < cfg.pos_tol && speed < cfg.vel_tol) {
      sample();
      traj.outcome = Outcome::kConverged;
      traj.end_time = t;
      return traj;
    }
    if (slow_since && t - *slow_since >= cfg.stall_window && aligned) {
      sample();
      traj.outcome = Outcome::kStalled;
      traj.stall_point = s.p;
      traj.end_time = t;
      return traj;
    }
    if (n >= max_steps || (observer && !observer(t, s))) {
      sample();
      const bool stalled = speed < cfg.vel_tol && aligned;
      traj.outcome = stalled ? Outcome::kStalled : Outcome::kTimeout;
      if (stalled) traj.stall_point = s.p;
      traj.end_time = t;
      return traj;
    }
    if (n % static_cast<std::uint64_t>(cfg.record_stride) == 0) sample();

    double sub_t = t;
    double h = cfg.dt;
    try {
      const double want = std::ceil(eval.stiffness * cfg.dt / cfg.stiffness_limit);
      const int m = static_cast<int>(std::clamp(want, 1.0, static_cast<double>(cfg.max_substeps)));
      h = cfg.dt / m;
      Vector u1 = eval.u;
      for (int j = 0; j < m; ++j) {
        const std::uint64_t sub_stream = (n << 16 | static_cast<std::uint64_t>(j)) * 4;
        if (j > 0) {
          try {
            u1 = controller.evaluate(env, s.p, s.v, sub_stream + 1).u;
          } catch (const SafetyViolation& e) {
            throw StageViolation(e, 1);
          }
          ++traj.evaluations;
        }
        s = detail::rk4_step(env, controller, s, h, u1, m == 1 ? stream : sub_stream);
        traj.evaluations += 3;
        sub_t += h;
      }
    } catch (const StageViolation& e) {
      traj.outcome = Outcome::kSafetyViolation;
      traj.violation_stage = e.stage();
      traj.violation_time = sub_t + (e.stage() == 4 ? h : e.stage() == 1 ? 0.0 : 0.5 * h);
      traj.violation_message = e.what();
      traj.end_time = traj.violation_time;
      return traj;
    }
  }
}

/// A batch entry either holds a trajectory or the error that prevented the
/// run from starting.
struct BatchEntry {
  Trajectory trajectory;
  std::string error;
  bool ok() const { return error.empty(); }
};

/// Independent runs, one per initial state, on up to `threads` workers
/// (0 = hardware concurrency). Results keep the input order.
inline std::vector<BatchEntry> batch_simulate(const Environment& env, const Controller& controller,
                                              const std::vector<State>& inits,
                                              const SimConfig& cfg, unsigned threads = 0) {
  std::vector<BatchEntry> out(inits.size());
  if (inits.empty()) return out;
  const auto run_one = [&](std::size_t i) {
    try {
      out[i].trajectory = simulate(env, controller, inits[i], cfg);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  };
  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(inits.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < inits.size(); ++i) run_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (std::size_t i = next++; i < inits.size(); i = next++) run_one(i);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace daf

#endif  // DAF_SIMULATION_HPP_
