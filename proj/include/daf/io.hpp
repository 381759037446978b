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

#ifndef DAF_IO_HPP_
#define DAF_IO_HPP_

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

#include "daf/analysis.hpp"
#include "daf/simulation.hpp"
#include "json.hpp"

namespace daf {

namespace detail {

inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

/// Writes one row per recorded sample: t, p1..pn, v1..vn, u1..un, d, L.
/// Values use 17 significant digits, so identical runs give identical bytes.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const Eigen::Index n = traj.samples.empty() ? 0 : traj.samples.front().p.size();
  os << "t";
  for (const char* prefix : {"p", "v", "u"}) {
    for (Eigen::Index i = 1; i <= n; ++i) os << ',' << prefix << i;
  }
  os << ",d,L\n";
  for (const auto& s : traj.samples) {
    os << detail::format_g17(s.t);
    for (const Vector* x : {&s.p, &s.v, &s.u}) {
      for (Eigen::Index i = 0; i < n; ++i) {
        os << ',' << detail::format_g17(i < x->size() ? (*x)[i] : NAN);
      }
    }
    os << ',' << detail::format_g17(s.d) << ',' << detail::format_g17(s.L) << '\n';
  }
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_trajectory_csv(out, traj);
  if (!out) throw Error("failed writing " + path);
}

/// Finite numbers as-is; infinities and NaN as null.
inline nlohmann::json json_number(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const Vector& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(json_number(v[i]));
  return out;
}

inline nlohmann::json to_json(const RunMetrics& m) {
  return {{"path_length", json_number(m.path_length)},
          {"peak_accel", json_number(m.peak_accel)},
          {"peak_speed", json_number(m.peak_speed)},
          {"min_clearance", json_number(m.min_clearance)},
          {"settle_time", json_number(m.settle_time)}};
}

inline nlohmann::json to_json(const Trajectory& traj) {
  nlohmann::json j = {{"outcome", to_string(traj.outcome)},
                      {"end_time", json_number(traj.end_time)},
                      {"samples", traj.samples.size()},
                      {"evaluations", traj.evaluations}};
  if (!traj.samples.empty()) {
    j["initial"] = {{"p", to_json(traj.samples.front().p)}, {"v", to_json(traj.samples.front().v)}};
    j["final"] = {{"p", to_json(traj.samples.back().p)}, {"v", to_json(traj.samples.back().v)}};
    j["metrics"] = to_json(metrics(traj));
  }
  if (traj.outcome == Outcome::kStalled) j["stall_point"] = to_json(traj.stall_point);
  if (traj.outcome == Outcome::kSafetyViolation) {
    j["violation"] = {{"time", json_number(traj.violation_time)},
                      {"stage", traj.violation_stage},
                      {"message", traj.violation_message}};
  }
  return j;
}

inline nlohmann::json to_json(const EquilibriumReport& r) {
  auto eig = nlohmann::json::array();
  for (double e : r.eigenvalues) eig.push_back(json_number(e));
  auto dirs = nlohmann::json::array();
  for (const auto& d : r.principal_dirs) dirs.push_back(to_json(d));
  return {{"p_star", to_json(r.p_star)},
          {"lambda", json_number(r.lambda)},
          {"eta", to_json(r.eta)},
          {"obstacle", r.obstacle},
          {"hessian_eigenvalues", eig},
          {"principal_directions", dirs},
          {"max_curvature", json_number(r.max_eigenvalue())},
          {"condition_rhs", json_number(r.condition_rhs)},
          {"unstable", r.unstable},
          {"alpha_phi", json_number(r.alpha_phi)},
          {"residual", json_number(r.residual)}};
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing " + path);
}

}  // namespace daf

#endif  // DAF_IO_HPP_
