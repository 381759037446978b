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

// Command-line front end: run, compare, analyze and validate scenarios.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "daf/analysis.hpp"
#include "daf/io.hpp"
#include "daf/scenario.hpp"
#include "daf/simulation.hpp"
#include "daf/svg.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;   // bad arguments, unreadable or invalid scenario
constexpr int kExitRuntime = 2;  // safety violation, I/O or numerical failure

struct Options {
  std::string scenario;
  std::string out_dir = "daf_out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> sensor_mode;
  std::optional<double> dt;
  std::optional<double> t_max;
  unsigned threads = 0;
  bool no_plot = false;
  // run
  std::optional<std::string> controller;
  // compare
  std::string baseline = "apf";
  // analyze
  std::optional<bool> probe;
  std::optional<double> sigma;
};

daf::Scenario load(const Options& o) {
  daf::Scenario sc = daf::load_scenario(o.scenario);
  if (o.seed) {
    sc.seed = *o.seed;
    sc.regenerate_random_states();
  }
  if (o.sensor_mode) {
    sc.mode = *o.sensor_mode == "lidar" ? daf::SensingMode::kLidar : daf::SensingMode::kOracle;
  }
  if (o.dt) sc.sim.dt = *o.dt;
  if (o.t_max) sc.sim.t_max = *o.t_max;
  sc.sim.validate();
  return sc;
}

std::filesystem::path prepare_out_dir(const Options& o) {
  std::filesystem::path dir(o.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string indexed(const std::string& stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03zu.%s", stem.c_str(), i, ext);
  return buf;
}

daf::ContourSet contours_for(const daf::Scenario& sc) {
  daf::ContourSet c{sc.env->epsilon(), 0.0, 0.0};
  if (sc.daf) {
    c.eps1 = sc.daf->eps1;
    c.eps2 = sc.daf->eps2;
  } else if (sc.apf) {
    c.eps2 = sc.apf->eps2;
  }
  return c;
}

nlohmann::json scenario_header(const daf::Scenario& sc) {
  return {{"scenario", sc.name},
          {"source", sc.source},
          {"seed", sc.seed},
          {"sensor_mode", sc.mode == daf::SensingMode::kLidar ? "lidar" : "oracle"},
          {"dt", sc.sim.dt},
          {"t_max", sc.sim.t_max}};
}

void print_run_row(std::size_t i, const daf::Trajectory& t) {
  const auto m = daf::metrics(t);
  std::printf("%4zu  %-16s %9.3f %12.5f %12.4f %12.4g\n", i, daf::to_string(t.outcome), t.end_time,
              m.min_clearance, m.path_length, m.peak_accel);
}

std::vector<daf::Trajectory> run_batch(const daf::Scenario& sc, const daf::Controller& ctrl,
                                       unsigned threads) {
  auto batch = daf::batch_simulate(*sc.env, ctrl, sc.initial_states, sc.sim, threads);
  std::vector<daf::Trajectory> out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!batch[i].ok()) throw daf::Error("run " + std::to_string(i) + ": " + batch[i].error);
    out.push_back(std::move(batch[i].trajectory));
  }
  return out;
}

int cmd_run(const Options& o) {
  daf::Scenario sc = load(o);
  if (o.controller) sc.controller = *o.controller;
  const auto ctrl = sc.make_controller();
  const auto dir = prepare_out_dir(o);
  const auto trajs = run_batch(sc, ctrl, o.threads);

  std::printf("%s: %zu runs, controller %s\n", sc.name.c_str(), trajs.size(), sc.controller.c_str());
  std::printf("%4s  %-16s %9s %12s %12s %12s\n", "run", "outcome", "t_end", "min_d0", "path", "peak|u|");
  nlohmann::json summary = scenario_header(sc);
  summary["controller"] = sc.controller;
  summary["runs"] = nlohmann::json::array();
  bool violated = false;
  std::vector<daf::PlotTrack> tracks;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const auto csv = indexed("run", i, "csv");
    daf::write_trajectory_csv((dir / csv).string(), trajs[i]);
    auto j = daf::to_json(trajs[i]);
    j["csv"] = csv;
    summary["runs"].push_back(j);
    print_run_row(i, trajs[i]);
    violated |= trajs[i].outcome == daf::Outcome::kSafetyViolation;
    tracks.push_back({&trajs[i], sc.controller == "daf" ? "#1f77b4" : "#2ca02c", sc.controller});
  }
  daf::write_json((dir / "summary.json").string(), summary);
  if (!o.no_plot) {
    daf::write_text((dir / "scene.svg").string(),
                    daf::plot_scene(*sc.env, contours_for(sc), tracks, sc.target));
  }
  std::printf("outputs in %s\n", dir.string().c_str());
  return violated ? kExitRuntime : kExitOk;
}

int cmd_compare(const Options& o) {
  const daf::Scenario sc = load(o);
  if (!sc.daf || (o.baseline == "apf" && !sc.apf)) {
    throw daf::ConfigError("compare needs both 'daf' and 'apf' gains in the scenario");
  }
  const auto dir = prepare_out_dir(o);
  // The baseline is normally APF; a DAF baseline is a determinism check.
  const std::string base = o.baseline == "apf" ? "apf" : "daf_baseline";
  const std::string base_label = o.baseline == "apf" ? "APF" : "DAF (baseline)";
  const auto daf_runs = run_batch(sc, sc.make_controller("daf"), o.threads);
  const auto apf_runs = run_batch(sc, sc.make_controller(o.baseline), o.threads);

  nlohmann::json out = scenario_header(sc);
  out["runs"] = nlohmann::json::array();
  out["baseline"] = base;
  std::printf("%s: DAF vs %s on %zu initial states\n", sc.name.c_str(), base_label.c_str(),
              daf_runs.size());
  std::printf("%4s  %-10s %-10s %11s %11s %9s %9s %9s %9s %9s %9s\n", "run", "daf", "base",
              "daf |u|max", "base |u|max", "daf |v|", "base |v|", "daf path", "base path",
              "daf clr", "base clr");
  bool violated = false;
  std::vector<daf::PlotTrack> scene;
  for (std::size_t i = 0; i < daf_runs.size(); ++i) {
    const auto md = daf::metrics(daf_runs[i]);
    const auto ma = daf::metrics(apf_runs[i]);
    daf::write_trajectory_csv((dir / indexed("daf", i, "csv")).string(), daf_runs[i]);
    daf::write_trajectory_csv((dir / indexed(base, i, "csv")).string(), apf_runs[i]);
    out["runs"].push_back({{"daf", daf::to_json(daf_runs[i])},
                           {base, daf::to_json(apf_runs[i])},
                           {"peak_accel_ratio", daf::json_number(ma.peak_accel / md.peak_accel)},
                           {"peak_speed_ratio", daf::json_number(ma.peak_speed / md.peak_speed)}});
    std::printf("%4zu  %-10s %-10s %11.4g %11.4g %9.4g %9.4g %9.4g %9.4g %9.4f %9.4f\n", i,
                daf::to_string(daf_runs[i].outcome), daf::to_string(apf_runs[i].outcome),
                md.peak_accel, ma.peak_accel, md.peak_speed, ma.peak_speed, md.path_length,
                ma.path_length, md.min_clearance, ma.min_clearance);
    violated |= daf_runs[i].outcome == daf::Outcome::kSafetyViolation ||
                apf_runs[i].outcome == daf::Outcome::kSafetyViolation;
    scene.push_back({&daf_runs[i], "#1f77b4", "DAF"});
    scene.push_back({&apf_runs[i], "#2ca02c", base_label});
    if (!o.no_plot) {
      daf::write_text((dir / indexed("series", i, "svg")).string(),
                      daf::plot_series({{&daf_runs[i], "#1f77b4", "DAF"}, {&apf_runs[i], "#2ca02c", base_label}},
                                       sc.daf->eps1, sc.daf->eps2));
    }
  }
  daf::write_json((dir / "compare.json").string(), out);
  if (!o.no_plot) {
    daf::write_text((dir / "scene.svg").string(),
                    daf::plot_scene(*sc.env, contours_for(sc), scene, sc.target));
  }
  std::printf("outputs in %s\n", dir.string().c_str());
  return violated ? kExitRuntime : kExitOk;
}

int cmd_analyze(const Options& o) {
  const daf::Scenario sc = load(o);
  if (!sc.daf) throw daf::ConfigError("analyze needs 'daf' gains in the scenario");
  const auto& p = *sc.daf;
  const auto dir = prepare_out_dir(o);
  const auto reports = daf::find_equilibria(*sc.env, p);
  const bool probe = o.probe.value_or(sc.probe.enabled);
  const double sigma = o.sigma.value_or(sc.probe.sigma);

  nlohmann::json out = scenario_header(sc);
  out["gains"] = {{"k1", p.k1}, {"k2", p.k2}, {"k3", p.k3}, {"eps1", p.eps1}, {"eps2", p.eps2}};
  out["equilibria"] = nlohmann::json::array();
  std::printf("%s: %zu undesired equilibria (k2/k1 = %g)\n", sc.name.c_str(), reports.size(), p.k2 / p.k1);
  // "above": initial states whose Lyapunov value exceeds the equilibrium's.
  std::printf("%4s %8s %10s %12s %12s %9s %8s%s\n", "idx", "obstacle", "lambda", "max_curv", "threshold",
              "unstable", "above", probe ? "  escaped" : "");
  std::vector<daf::ProbeResult> probes;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    auto j = daf::to_json(r);
    // A start whose Lyapunov value lies below that of p* can never stall there.
    std::size_t below = 0;
    for (const auto& s : sc.initial_states) {
      below += daf::lyapunov(s.p, s.v, p) < 0.5 * p.k1 * r.lambda * r.lambda;
    }
    j["initial_states_below_level"] = below;
    std::optional<bool> escaped;
    if (probe) {
      probes.push_back(daf::escape_probe(*sc.env, r, p, sigma, sc.probe.config));
      const auto& pr = probes.back();
      escaped = pr.escaped;
      j["probe"] = {{"sigma", pr.sigma},
                    {"escaped", pr.escaped},
                    {"max_excursion", daf::json_number(pr.max_excursion)},
                    {"outcome", daf::to_string(pr.trajectory.outcome)}};
    }
    out["equilibria"].push_back(j);
    std::printf("%4zu %8d %10.5f %12.6f %12.6f %9s %8zu%s\n", i, r.obstacle, r.lambda, r.max_eigenvalue(),
                r.condition_rhs, r.unstable ? "yes" : "no", sc.initial_states.size() - below,
                escaped ? (*escaped ? "  yes" : "  no") : "");
  }
  daf::write_json((dir / "equilibria.json").string(), out);
  if (!o.no_plot && !probes.empty()) {
    std::vector<daf::PlotTrack> tracks;
    for (const auto& pr : probes) tracks.push_back({&pr.trajectory, pr.escaped ? "#1f77b4" : "#d62728", ""});
    daf::write_text((dir / "probes.svg").string(),
                    daf::plot_scene(*sc.env, contours_for(sc), tracks, sc.target));
  }
  std::printf("outputs in %s\n", dir.string().c_str());
  return kExitOk;
}

int cmd_validate(const Options& o) {
  const daf::Scenario sc = load(o);
  const auto report = daf::validate_environment(*sc.env);
  for (const auto& c : report.checks) {
    std::printf("%-34s %-4s %s\n", c.name.c_str(), c.passed ? "ok" : "FAIL", c.detail.c_str());
  }
  std::printf("%s: valid, dimension %ld, %zu obstacles, %zu initial states\n", sc.name.c_str(),
              static_cast<long>(sc.env->dimension()), sc.env->obstacles().size(), sc.initial_states.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Navigation with distance-aware damping: simulate, compare and analyze scenarios"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("scenario", o.scenario, "Scenario file, or name of a bundled scenario")->required();
    sub->add_option("--out-dir", o.out_dir, "Directory for outputs")->capture_default_str();
    sub->add_option("--seed", o.seed, "Override the scenario seed");
    sub->add_option("--sensor-mode", o.sensor_mode, "Distance source")
        ->check(CLI::IsMember({"oracle", "lidar"}));
    sub->add_option("--dt", o.dt, "Override the integration step")->check(CLI::PositiveNumber);
    sub->add_option("--t-max", o.t_max, "Override the simulated horizon")->check(CLI::PositiveNumber);
    sub->add_option("--threads", o.threads, "Worker threads (0: hardware)");
    sub->add_flag("--no-plot", o.no_plot, "Skip SVG output");
  };
  auto* run = app.add_subcommand("run", "Simulate every initial state of a scenario");
  common(run);
  run->add_option("--controller", o.controller, "Control law")->check(CLI::IsMember({"daf", "apf"}));
  auto* compare = app.add_subcommand("compare", "Run DAF and APF from the same initial states");
  common(compare);
  compare->add_option("--baseline", o.baseline, "Law compared against DAF")
      ->check(CLI::IsMember({"apf", "daf"}))
      ->capture_default_str();
  auto* analyze = app.add_subcommand("analyze", "Locate undesired equilibria and classify them");
  common(analyze);
  analyze->add_flag("--probe,!--no-probe", o.probe,
                    "Run (or skip) an escape probe at each equilibrium; default from the scenario");
  analyze->add_option("--sigma", o.sigma, "Probe perturbation size")->check(CLI::PositiveNumber);
  auto* validate = app.add_subcommand("validate", "Check a scenario file and its environment");
  common(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  try {
    if (*run) return cmd_run(o);
    if (*compare) return cmd_compare(o);
    if (*analyze) return cmd_analyze(o);
    return cmd_validate(o);
  } catch (const daf::ScenarioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const daf::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
