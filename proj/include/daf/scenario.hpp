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

#ifndef DAF_SCENARIO_HPP_
#define DAF_SCENARIO_HPP_

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "daf/analysis.hpp"
#include "daf/control.hpp"
#include "daf/geometry.hpp"
#include "daf/sensing.hpp"
#include "daf/simulation.hpp"
#include "daf/types.hpp"
#include "json.hpp"

namespace daf {

/// Problem with a scenario file. `field` is a JSON pointer ("/obstacles/2/
/// radius") and `line` the 1-based line where it starts, when known.
class ScenarioError : public Error {
 public:
  ScenarioError(std::string source, std::string field, int line, const std::string& message)
      : Error(format(source, field, line, message)),
        source_(std::move(source)),
        field_(std::move(field)),
        line_(line) {}
  const std::string& field() const { return field_; }
  int line() const { return line_; }
  const std::string& source() const { return source_; }

 private:
  static std::string format(const std::string& source, const std::string& field, int line,
                            const std::string& message) {
    std::string out = source;
    if (line > 0) out += ":" + std::to_string(line);
    if (!field.empty()) out += ": " + field;
    return out + ": " + message;
  }
  std::string source_;
  std::string field_;
  int line_;
};

namespace detail {

/// Maps JSON pointers to the line on which their value starts. Assumes the
/// text already parsed as JSON.
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) { scan(text); }

  int line_of(const std::string& pointer) const {
    std::string p = pointer;
    while (true) {
      if (const auto it = lines_.find(p); it != lines_.end()) return it->second;
      const auto slash = p.rfind('/');
      if (slash == std::string::npos || p.empty()) return 0;
      p = p.substr(0, slash);
    }
  }

 private:
  struct Frame {
    bool array;
    int index;
    std::string key;
  };

  static std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~') {
        out += "~0";
      } else if (c == '/') {
        out += "~1";
      } else {
        out += c;
      }
    }
    return out;
  }

  std::string pointer() const {
    std::string p;
    for (const auto& f : stack_) p += "/" + (f.array ? std::to_string(f.index) : escape(f.key));
    return p;
  }

  void value_starts(int line) {
    if (!stack_.empty() && stack_.back().array) ++stack_.back().index;
    lines_.emplace(pointer(), line);
  }

  void scan(const std::string& text) {
    int line = 1;
    bool expecting_key = false;
    std::string last_string;
    for (std::size_t i = 0; i < text.size(); ++i) {
      const char c = text[i];
      if (c == '\n') {
        ++line;
      } else if (c == '"') {
        std::string s;
        for (++i; i < text.size() && text[i] != '"'; ++i) {
          if (text[i] == '\\' && i + 1 < text.size()) {
            s += text[++i];
          } else {
            s += text[i];
          }
        }
        if (expecting_key) {
          stack_.back().key = s;
          expecting_key = false;
        } else {
          value_starts(line);
        }
      } else if (c == '{' || c == '[') {
        if (!stack_.empty()) value_starts(line);
        else lines_.emplace("", line);
        stack_.push_back({c == '[', -1, {}});
        expecting_key = c == '{';
      } else if (c == '}' || c == ']') {
        stack_.pop_back();
        expecting_key = false;
      } else if (c == ',') {
        expecting_key = !stack_.empty() && !stack_.back().array;
      } else if (c == ':') {
        expecting_key = false;
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        value_starts(line);
        while (i + 1 < text.size() && std::string(",}] \t\r\n").find(text[i + 1]) == std::string::npos)
          ++i;
      }
    }
  }

  std::vector<Frame> stack_;
  std::map<std::string, int> lines_;
};

/// Typed accessors over a JSON object that report problems with the field
/// path and line.
class Reader {
 public:
  Reader(const nlohmann::json& root, std::string source, const LineIndex& lines)
      : root_(root), source_(std::move(source)), lines_(lines) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& message) const {
    throw ScenarioError(source_, pointer, lines_.line_of(pointer), message);
  }

  const nlohmann::json& at(const std::string& pointer) const {
    return root_.at(nlohmann::json::json_pointer(pointer));
  }

  bool has(const std::string& pointer) const {
    return root_.contains(nlohmann::json::json_pointer(pointer));
  }

  const nlohmann::json& require_kind(const std::string& pointer, nlohmann::json::value_t kind,
                                     const char* what) const {
    if (!has(pointer)) fail(pointer, std::string("missing required field (") + what + ")");
    const auto& v = at(pointer);
    const bool ok = kind == nlohmann::json::value_t::number_float ? v.is_number() : v.type() == kind;
    if (!ok) fail(pointer, std::string("expected ") + what);
    return v;
  }

  double number(const std::string& pointer) const {
    const double x = require_kind(pointer, nlohmann::json::value_t::number_float, "a number")
                         .get<double>();
    if (!std::isfinite(x)) fail(pointer, "must be finite");
    return x;
  }
  double number(const std::string& pointer, double fallback) const {
    return has(pointer) ? number(pointer) : fallback;
  }
  double positive(const std::string& pointer) const {
    const double x = number(pointer);
    if (!(x > 0.0)) fail(pointer, "must be positive");
    return x;
  }
  double positive(const std::string& pointer, double fallback) const {
    return has(pointer) ? positive(pointer) : fallback;
  }
  std::int64_t integer(const std::string& pointer, std::int64_t fallback) const {
    if (!has(pointer)) return fallback;
    const auto& v = at(pointer);
    if (!v.is_number_integer()) fail(pointer, "expected an integer");
    return v.get<std::int64_t>();
  }
  std::string string(const std::string& pointer) const {
    return require_kind(pointer, nlohmann::json::value_t::string, "a string").get<std::string>();
  }
  std::string string(const std::string& pointer, const std::string& fallback) const {
    return has(pointer) ? string(pointer) : fallback;
  }
  bool boolean(const std::string& pointer, bool fallback) const {
    if (!has(pointer)) return fallback;
    return require_kind(pointer, nlohmann::json::value_t::boolean, "true or false").get<bool>();
  }
  std::size_t array_size(const std::string& pointer) const {
    return require_kind(pointer, nlohmann::json::value_t::array, "an array").size();
  }
  bool is_object(const std::string& pointer) const {
    return has(pointer) && at(pointer).is_object();
  }
  Vector vector(const std::string& pointer, Eigen::Index dim) const {
    const std::size_t n = array_size(pointer);
    if (static_cast<Eigen::Index>(n) != dim) {
      fail(pointer, "expected " + std::to_string(dim) + " coordinates, got " + std::to_string(n));
    }
    Vector v(dim);
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = number(pointer + "/" + std::to_string(i));
    return v;
  }
  const std::string& source() const { return source_; }

 private:
  const nlohmann::json& root_;
  std::string source_;
  const LineIndex& lines_;
};

}  // namespace detail

/// Region sampled for additional random initial positions.
struct RandomInits {
  std::size_t count = 0;
  Vector lower;
  Vector upper;
  double min_margin = 0.1;  // required clearance margin d at the start
};

/// Escape-probe settings of the analyze command.
struct ProbeSettings {
  bool enabled = false;
  double sigma = 1e-2;
  ProbeConfig config;
};

struct Scenario {
  static constexpr int kVersion = 1;

  std::string name;
  std::string description;
  std::string source;
  std::shared_ptr<const Environment> env;
  Vector target;
  std::optional<DafParams> daf;
  std::optional<ApfParams> apf;
  std::string controller = "daf";  // law used by `run`
  std::vector<State> initial_states;
  std::size_t explicit_states = 0;  // leading entries given verbatim
  std::optional<RandomInits> random_inits;
  SensorConfig sensor;
  SensingMode mode = SensingMode::kOracle;
  SimConfig sim;
  std::uint64_t seed = 0;
  ProbeSettings probe;

  Controller make_controller(const std::string& law) const {
    if (law == "daf") {
      if (!daf) throw ConfigError("scenario declares no DAF gains");
      return Controller(*daf, mode, sensor, seed);
    }
    if (law == "apf") {
      if (!apf) throw ConfigError("scenario declares no APF gains");
      return Controller(*apf, mode, sensor, seed);
    }
    throw ConfigError("unknown controller '" + law + "'");
  }
  Controller make_controller() const { return make_controller(controller); }

  /// Replaces the random part of the initial states using `seed`.
  void regenerate_random_states() {
    initial_states.resize(explicit_states);
    if (!random_inits || random_inits->count == 0) return;
    std::mt19937_64 rng(seed ^ 0x5eed5eed5eedULL);
    const auto& r = *random_inits;
    const Eigen::Index n = env->dimension();
    std::size_t attempts = 0;
    while (initial_states.size() < explicit_states + r.count) {
      if (++attempts > 1000000) {
        throw ConfigError("could not place random initial states with the requested margin");
      }
      Vector p(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        p[i] = std::uniform_real_distribution<double>(r.lower[i], r.upper[i])(rng);
      }
      if (!env->in_workspace(p)) continue;
      if (env->clearance(p) - env->epsilon() <= r.min_margin) continue;
      initial_states.push_back({p, Vector::Zero(n)});
    }
  }
};

namespace detail {

inline Obstacle parse_obstacle(const Reader& r, const std::string& at, Eigen::Index dim) {
  const std::string type = r.string(at + "/type");
  try {
    if (type == "ball") {
      return make_ball(r.vector(at + "/center", dim), r.positive(at + "/radius"));
    }
    if (type == "ellipsoid") {
      const Vector center = r.vector(at + "/center", dim);
      const Vector axes = r.vector(at + "/semi_axes", dim);
      for (Eigen::Index i = 0; i < dim; ++i) {
        if (!(axes[i] > 0.0)) r.fail(at + "/semi_axes/" + std::to_string(i), "must be positive");
      }
      std::optional<Matrix> frame;
      if (r.has(at + "/angle_deg")) {
        if (dim != 2) r.fail(at + "/angle_deg", "angle_deg is only valid in 2D; use axes");
        frame = rotation_2d(r.number(at + "/angle_deg") * std::numbers::pi / 180.0);
      } else if (r.has(at + "/axes")) {
        if (r.array_size(at + "/axes") != static_cast<std::size_t>(dim)) {
          r.fail(at + "/axes", "expected one direction per dimension");
        }
        Matrix m(dim, dim);
        for (Eigen::Index j = 0; j < dim; ++j) {
          m.col(j) = r.vector(at + "/axes/" + std::to_string(j), dim);
        }
        frame = m;
      }
      return make_ellipsoid(center, axes, frame);
    }
    if (type == "spline") {
      if (dim != 2) r.fail(at + "/type", "spline obstacles are planar only");
      const std::size_t n = r.array_size(at + "/points");
      std::vector<Eigen::Vector2d> pts;
      for (std::size_t k = 0; k < n; ++k) {
        const Vector q = r.vector(at + "/points/" + std::to_string(k), 2);
        pts.emplace_back(q[0], q[1]);
      }
      return make_spline(pts);
    }
  } catch (const ScenarioError&) {
    throw;
  } catch (const ConfigError& e) {
    r.fail(at, e.what());
  }
  r.fail(at + "/type", "unknown obstacle type '" + type + "' (ball, ellipsoid, spline)");
}

inline Workspace parse_workspace(const Reader& r, Eigen::Index dim) {
  const std::string type = r.string("/workspace/type");
  if (type == "box") {
    BoxWorkspace w{r.vector("/workspace/lower", dim), r.vector("/workspace/upper", dim)};
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (!(w.upper[i] > w.lower[i])) r.fail("/workspace/upper", "must exceed lower in every axis");
    }
    return w;
  }
  if (type == "ball") {
    return BallWorkspace{r.vector("/workspace/center", dim), r.positive("/workspace/radius")};
  }
  if (type == "unbounded") return UnboundedWorkspace{};
  r.fail("/workspace/type", "unknown workspace type '" + type + "' (box, ball, unbounded)");
}

}  // namespace detail

/// Parses and checks a scenario document. `source` names it in errors.
inline Scenario parse_scenario(const std::string& text, const std::string& source) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    int line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i) line += text[i] == '\n';
    throw ScenarioError(source, "", line, std::string("invalid JSON: ") + e.what());
  }
  const detail::LineIndex lines(text);
  const detail::Reader r(root, source, lines);
  if (!root.is_object()) r.fail("", "scenario must be a JSON object");

  Scenario sc;
  sc.source = source;
  const auto version = r.integer("/version", -1);
  if (version == -1) r.fail("/version", "missing required field ('version')");
  if (version != Scenario::kVersion) {
    r.fail("/version", "unsupported version " + std::to_string(version) + " (expected " +
                           std::to_string(Scenario::kVersion) + ")");
  }
  sc.name = r.string("/name", std::filesystem::path(source).stem().string());
  sc.description = r.string("/description", "");
  const auto dim64 = r.integer("/dimension", -1);
  if (dim64 == -1) r.fail("/dimension", "missing required field (an integer)");
  if (dim64 < 2) r.fail("/dimension", "must be at least 2");
  const Eigen::Index dim = dim64;

  if (!r.is_object("/workspace")) r.fail("/workspace", "missing required object");
  Workspace ws = detail::parse_workspace(r, dim);
  std::vector<Obstacle> obstacles;
  if (r.has("/obstacles")) {
    const std::size_t n = r.array_size("/obstacles");
    for (std::size_t i = 0; i < n; ++i) {
      obstacles.push_back(detail::parse_obstacle(r, "/obstacles/" + std::to_string(i), dim));
    }
  }
  const double eps = r.positive("/epsilon");
  const double radius = r.positive("/robot_radius");
  std::optional<double> reach, regularity;
  if (r.has("/reach_bound")) reach = r.positive("/reach_bound");
  if (r.has("/regularity_bound")) regularity = r.positive("/regularity_bound");
  try {
    sc.env = std::make_shared<const Environment>(std::move(ws), std::move(obstacles), eps, radius,
                                                 reach, regularity);
  } catch (const ConfigError& e) {
    r.fail("/workspace", e.what());
  }
  sc.target = r.vector("/target", dim);

  if (r.has("/daf")) {
    DafParams p;
    p.k1 = r.positive("/daf/k1");
    p.k2 = r.positive("/daf/k2");
    p.k3 = r.positive("/daf/k3");
    p.eps1 = r.positive("/daf/eps1");
    p.eps2 = r.positive("/daf/eps2");
    p.target = sc.target;
    try {
      p.validate();
    } catch (const ConfigError& e) {
      r.fail("/daf", e.what());
    }
    sc.daf = p;
  }
  if (r.has("/apf")) {
    ApfParams p;
    p.ka = r.positive("/apf/ka");
    p.kv = r.positive("/apf/kv");
    p.kr = r.positive("/apf/kr");
    p.eps2 = r.positive("/apf/eps2");
    p.target = sc.target;
    try {
      p.validate();
    } catch (const ConfigError& e) {
      r.fail("/apf", e.what());
    }
    sc.apf = p;
  }
  if (!sc.daf && !sc.apf) r.fail("/daf", "scenario needs DAF and/or APF gains");
  sc.controller = r.string("/controller", sc.daf ? "daf" : "apf");
  if (sc.controller != "daf" && sc.controller != "apf") {
    r.fail("/controller", "must be 'daf' or 'apf'");
  }
  if ((sc.controller == "daf" && !sc.daf) || (sc.controller == "apf" && !sc.apf)) {
    r.fail("/controller", "selected controller has no gains");
  }

  if (r.has("/sensor")) {
    sc.sensor.max_range = r.positive("/sensor/max_range", sc.sensor.max_range);
    sc.sensor.ray_count = static_cast<int>(r.integer("/sensor/ray_count", sc.sensor.ray_count));
    sc.sensor.noise_stddev = r.number("/sensor/noise_stddev", 0.0);
    const std::string mode = r.string("/sensor/mode", "oracle");
    if (mode == "lidar") {
      sc.mode = SensingMode::kLidar;
    } else if (mode != "oracle") {
      r.fail("/sensor/mode", "must be 'oracle' or 'lidar'");
    }
    try {
      sc.sensor.validate(dim);
    } catch (const ConfigError& e) {
      r.fail("/sensor", e.what());
    }
  }

  if (r.has("/simulation")) {
    sc.sim.dt = r.positive("/simulation/dt", sc.sim.dt);
    sc.sim.t_max = r.positive("/simulation/t_max", sc.sim.t_max);
    sc.sim.pos_tol = r.positive("/simulation/pos_tol", sc.sim.pos_tol);
    sc.sim.vel_tol = r.positive("/simulation/vel_tol", sc.sim.vel_tol);
    const auto stride = r.integer("/simulation/record_stride", sc.sim.record_stride);
    if (stride < 1) r.fail("/simulation/record_stride", "must be at least 1");
    sc.sim.record_stride = static_cast<int>(stride);
  } else if (dim >= 3) {
    sc.sim.t_max = 120.0;
  }
  const auto seed = r.integer("/seed", 0);
  if (seed < 0) r.fail("/seed", "must be non-negative");
  sc.seed = static_cast<std::uint64_t>(seed);

  if (r.has("/initial_states")) {
    const std::size_t n = r.array_size("/initial_states");
    for (std::size_t i = 0; i < n; ++i) {
      const std::string at = "/initial_states/" + std::to_string(i);
      State s{r.vector(at + "/p", dim),
              r.has(at + "/v") ? r.vector(at + "/v", dim) : Vector::Zero(dim)};
      if (!sc.env->in_workspace(s.p)) r.fail(at + "/p", "outside the workspace");
      if (!(sc.env->nearest(s.p).d0 > eps)) {
        r.fail(at + "/p", "not in the interior of the practical free space");
      }
      sc.initial_states.push_back(s);
    }
  }
  sc.explicit_states = sc.initial_states.size();
  if (r.has("/random_initial_states")) {
    RandomInits ri;
    const auto count = r.integer("/random_initial_states/count", 0);
    if (count < 0) r.fail("/random_initial_states/count", "must be non-negative");
    ri.count = static_cast<std::size_t>(count);
    ri.lower = r.vector("/random_initial_states/lower", dim);
    ri.upper = r.vector("/random_initial_states/upper", dim);
    ri.min_margin = r.number("/random_initial_states/min_margin", ri.min_margin);
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (!(ri.upper[i] >= ri.lower[i])) {
        r.fail("/random_initial_states/upper", "must not be below lower");
      }
    }
    sc.random_inits = ri;
  }

  if (r.has("/analysis")) {
    sc.probe.enabled = r.boolean("/analysis/escape_probe", false);
    sc.probe.sigma = r.positive("/analysis/sigma", sc.probe.sigma);
    sc.probe.config.sim.dt = r.positive("/analysis/probe_dt", sc.probe.config.sim.dt);
    sc.probe.config.sim.t_max = r.positive("/analysis/probe_t_max", sc.probe.config.sim.t_max);
    sc.probe.config.lift = r.number("/analysis/lift", sc.probe.config.lift);
  }

  // Cross-checks between the environment, the sensor and the controllers.
  const auto report = validate_environment(*sc.env);
  for (const auto& c : report.checks) {
    if (!c.passed) r.fail("/obstacles", "environment check '" + c.name + "' failed: " + c.detail);
  }
  if (!(sc.env->nearest(sc.target).d0 > eps)) {
    r.fail("/target", "target is not in the interior of the practical free space");
  }
  const double bound = std::min(reach.value_or(INFINITY), regularity.value_or(INFINITY));
  for (const auto& [field, eps2] : {std::pair{std::string("/daf/eps2"), sc.daf ? sc.daf->eps2 : 0.0},
                                   std::pair{std::string("/apf/eps2"), sc.apf ? sc.apf->eps2 : 0.0}}) {
    if (eps2 == 0.0) continue;
    if (!(sc.sensor.max_range > eps2 + eps)) {
      r.fail("/sensor/max_range", "sensor range must exceed eps2 + epsilon (" +
                                      std::to_string(eps2 + eps) + ")");
    }
    if (std::isfinite(bound) && !(eps2 < bound - eps)) {
      r.fail(field, "eps2 must be below min(reach_bound, regularity_bound) - epsilon");
    }
  }
  try {
    sc.regenerate_random_states();
  } catch (const ConfigError& e) {
    r.fail("/random_initial_states", e.what());
  }
  if (sc.initial_states.empty()) r.fail("/initial_states", "scenario has no initial states");
  return sc;
}

/// Reads a scenario file. A bare name without a path separator or
/// extension that does not exist as a file is looked up among the bundled
/// scenarios.
inline Scenario load_scenario(const std::string& name_or_path,
                              const std::string& bundled_dir = DAF_SCENARIO_DIR) {
  std::filesystem::path path(name_or_path);
  if (!std::filesystem::exists(path) && !path.has_parent_path() && !path.has_extension()) {
    path = std::filesystem::path(bundled_dir) / (name_or_path + ".json");
  }
  std::ifstream in(path);
  if (!in) throw ScenarioError(name_or_path, "", 0, "cannot open scenario file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.string());
}

}  // namespace daf

#endif  // DAF_SCENARIO_HPP_
