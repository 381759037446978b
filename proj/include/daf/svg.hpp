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

#ifndef DAF_SVG_HPP_
#define DAF_SVG_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "daf/geometry.hpp"
#include "daf/simulation.hpp"

namespace daf {

/// A trajectory to draw, with its stroke colour and legend label.
struct PlotTrack {
  const Trajectory* trajectory = nullptr;
  std::string color = "#1f77b4";
  std::string label;
};

/// Contour levels of the clearance field d0 drawn around obstacles.
struct ContourSet {
  double epsilon = 0.0;
  double eps1 = 0.0;  // drawn at epsilon + eps1 when positive
  double eps2 = 0.0;  // drawn at epsilon + eps2 when positive
};

namespace svg {

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

/// Affine map from a world rectangle to a pixel panel, y pointing up.
struct Frame {
  double x0, y0, x1, y1;       // world bounds
  double left, top, width, height;  // pixels

  double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
  double py(double y) const { return top + (y1 - y) / (y1 - y0) * height; }
  double scale() const { return width / (x1 - x0); }
};

/// Fits a frame to the world box keeping the aspect ratio.
inline Frame fit(double x0, double y0, double x1, double y1, double left, double top,
                 double max_w, double max_h) {
  const double w = x1 - x0, h = y1 - y0;
  const double s = std::min(max_w / w, max_h / h);
  return {x0, y0, x1, y1, left + 0.5 * (max_w - s * w), top + 0.5 * (max_h - s * h), s * w, s * h};
}

inline std::string polyline(const Frame& f, const std::vector<std::array<double, 2>>& pts,
                            bool closed) {
  std::string d;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    d += (i == 0 ? "M" : "L") + num(f.px(pts[i][0])) + " " + num(f.py(pts[i][1])) + " ";
  }
  if (closed) d += "Z";
  return d;
}

/// Marching squares on a sampled scalar field; returns SVG path data.
template <typename Field>
std::string contour(const Frame& f, Field&& field, double level, int nx, int ny) {
  std::vector<double> v(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  const auto at = [&](int i, int j) -> double& { return v[static_cast<std::size_t>(j * (nx + 1) + i)]; };
  const double hx = (f.x1 - f.x0) / nx, hy = (f.y1 - f.y0) / ny;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) at(i, j) = field(f.x0 + i * hx, f.y0 + j * hy) - level;
  }
  std::string d;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::array<double, 4> c{at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)};
      const std::array<std::array<double, 2>, 4> xy{{{f.x0 + i * hx, f.y0 + j * hy},
                                                     {f.x0 + (i + 1) * hx, f.y0 + j * hy},
                                                     {f.x0 + (i + 1) * hx, f.y0 + (j + 1) * hy},
                                                     {f.x0 + i * hx, f.y0 + (j + 1) * hy}}};
      std::vector<std::array<double, 2>> cross;
      for (int e = 0; e < 4; ++e) {
        const int a = e, b = (e + 1) % 4;
        if ((c[a] < 0.0) == (c[b] < 0.0)) continue;
        const double t = c[a] / (c[a] - c[b]);
        cross.push_back({xy[a][0] + t * (xy[b][0] - xy[a][0]), xy[a][1] + t * (xy[b][1] - xy[a][1])});
      }
      for (std::size_t k = 0; k + 1 < cross.size(); k += 2) {
        d += "M" + num(f.px(cross[k][0])) + " " + num(f.py(cross[k][1])) + " L" +
             num(f.px(cross[k + 1][0])) + " " + num(f.py(cross[k + 1][1])) + " ";
      }
    }
  }
  return d;
}

/// Boundary outline of an obstacle projected onto axes (ax, ay).
inline std::vector<std::array<double, 2>> outline(const Obstacle& o, int ax, int ay) {
  std::vector<std::array<double, 2>> pts;
  constexpr int kSegments = 96;
  if (const auto* s = std::get_if<Spline2D>(&o)) {
    const double period = s->curve->period();
    for (int k = 0; k < 8 * static_cast<int>(period); ++k) {
      const auto q = s->curve->position(k * period / (8 * period));
      pts.push_back({q[0], q[1]});
    }
    return pts;
  }
  Vector c;
  Matrix shape;  // boundary = c + chol(shape) * unit circle
  if (const auto* b = std::get_if<Ball>(&o)) {
    c = b->center;
    shape = Matrix::Identity(2, 2) * b->radius * b->radius;
  } else {
    const auto& e = std::get<Ellipsoid>(o);
    c = e.center;
    const Matrix full = e.orientation * e.semi_axes.array().square().matrix().asDiagonal() * e.orientation.transpose();
    shape.resize(2, 2);
    shape << full(ax, ax), full(ax, ay), full(ay, ax), full(ay, ay);
  }
  const Matrix l = Eigen::LLT<Matrix>(shape).matrixL();
  for (int k = 0; k < kSegments; ++k) {
    const double th = 2.0 * std::numbers::pi * k / kSegments;
    const Eigen::Vector2d q = l * Eigen::Vector2d(std::cos(th), std::sin(th));
    pts.push_back({c[ax] + q[0], c[ay] + q[1]});
  }
  return pts;
}

inline std::array<double, 4> extent(const Environment& env, const std::vector<PlotTrack>& tracks,
                                    const Vector& target, int ax, int ay) {
  double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
  const auto grow = [&](double x, double y, double r) {
    x0 = std::min(x0, x - r), x1 = std::max(x1, x + r);
    y0 = std::min(y0, y - r), y1 = std::max(y1, y + r);
  };
  if (const auto* box = std::get_if<BoxWorkspace>(&env.workspace())) {
    grow(box->lower[ax], box->lower[ay], 0.0);
    grow(box->upper[ax], box->upper[ay], 0.0);
  } else if (const auto* ball = std::get_if<BallWorkspace>(&env.workspace())) {
    grow(ball->center[ax], ball->center[ay], ball->radius);
  } else {
    for (const auto& [c, r] : env.obstacle_bounds_list()) grow(c[ax], c[ay], r + env.epsilon());
    for (const auto& t : tracks) {
      for (const auto& s : t.trajectory->samples) grow(s.p[ax], s.p[ay], 0.0);
    }
    if (target.size() > 0) grow(target[ax], target[ay], 0.0);
    const double pad = 0.08 * std::max(x1 - x0, y1 - y0);
    x0 -= pad, y0 -= pad, x1 += pad, y1 += pad;
  }
  return {x0, y0, x1, y1};
}

/// Draws one projected panel of the scene.
inline void panel(std::ostringstream& out, const Environment& env, const ContourSet& levels,
                  const std::vector<PlotTrack>& tracks, const Vector& target, int ax, int ay,
                  const Frame& f, bool contours) {
  const auto& ws = env.workspace();
  if (const auto* box = std::get_if<BoxWorkspace>(&ws)) {
    out << "<rect x='" << num(f.px(box->lower[ax])) << "' y='" << num(f.py(box->upper[ay]))
        << "' width='" << num(f.scale() * (box->upper[ax] - box->lower[ax])) << "' height='"
        << num(f.scale() * (box->upper[ay] - box->lower[ay]))
        << "' fill='none' stroke='#333' stroke-width='2'/>\n";
  } else if (const auto* ball = std::get_if<BallWorkspace>(&ws)) {
    out << "<circle cx='" << num(f.px(ball->center[ax])) << "' cy='" << num(f.py(ball->center[ay]))
        << "' r='" << num(f.scale() * ball->radius) << "' fill='none' stroke='#333' stroke-width='2'/>\n";
  }
  for (const auto& o : env.obstacles()) {
    out << "<path d='" << polyline(f, outline(o, ax, ay), true)
        << "' fill='#9aa0a6' stroke='#444' stroke-width='1'/>\n";
  }
  if (contours && env.dimension() == 2) {
    const int nx = 240, ny = std::max(8, static_cast<int>(240 * f.height / f.width));
    const auto field = [&](double x, double y) { return env.nearest(make_vector({x, y})).d0; };
    const std::array<std::pair<double, const char*>, 3> lv{
        {{levels.epsilon, "stroke='#d62728' stroke-width='1.5'"},
         {levels.eps1 > 0 ? levels.epsilon + levels.eps1 : -1.0,
          "stroke='#ff7f0e' stroke-width='1' stroke-dasharray='6 3'"},
         {levels.eps2 > 0 ? levels.epsilon + levels.eps2 : -1.0,
          "stroke='#bcbd22' stroke-width='1' stroke-dasharray='2 3'"}}};
    for (const auto& [level, style] : lv) {
      if (level <= 0.0) continue;
      out << "<path d='" << contour(f, field, level, nx, ny) << "' fill='none' " << style << "/>\n";
    }
  }
  for (const auto& t : tracks) {
    std::vector<std::array<double, 2>> pts;
    for (const auto& s : t.trajectory->samples) pts.push_back({s.p[ax], s.p[ay]});
    out << "<path d='" << polyline(f, pts, false) << "' fill='none' stroke='" << t.color
        << "' stroke-width='1.5'/>\n";
    if (!pts.empty()) {
      out << "<circle cx='" << num(f.px(pts.front()[0])) << "' cy='" << num(f.py(pts.front()[1]))
          << "' r='3' fill='" << t.color << "'/>\n";
    }
  }
  if (target.size() > 0) {
    out << "<circle cx='" << num(f.px(target[ax])) << "' cy='" << num(f.py(target[ay]))
        << "' r='5' fill='#2ca02c' stroke='#000'/>\n";
  }
}

inline void legend(std::ostringstream& out, const std::vector<PlotTrack>& tracks, double x, double y) {
  std::vector<std::string> seen;
  for (const auto& t : tracks) {
    if (t.label.empty() || std::find(seen.begin(), seen.end(), t.label) != seen.end()) continue;
    seen.push_back(t.label);
    out << "<line x1='" << num(x) << "' y1='" << num(y) << "' x2='" << num(x + 24) << "' y2='"
        << num(y) << "' stroke='" << t.color << "' stroke-width='2'/>\n"
        << "<text x='" << num(x + 30) << "' y='" << num(y + 4) << "' font-size='12'>" << t.label
        << "</text>\n";
    y += 16;
  }
}

}  // namespace svg

/// Scene plot. Planar scenes get one panel with clearance contours; 3D scenes
/// get the xy, xz and yz projections.
inline std::string plot_scene(const Environment& env, const ContourSet& levels,
                              const std::vector<PlotTrack>& tracks, const Vector& target) {
  std::ostringstream out;
  if (env.dimension() == 2) {
    const auto e = svg::extent(env, tracks, target, 0, 1);
    const auto f = svg::fit(e[0], e[1], e[2], e[3], 20, 20, 760, 760);
    const double w = f.width + 40, h = f.height + 40;
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << svg::num(w) << "' height='"
        << svg::num(h) << "' viewBox='0 0 " << svg::num(w) << " " << svg::num(h) << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    svg::panel(out, env, levels, tracks, target, 0, 1, {f.x0, f.y0, f.x1, f.y1, 20, 20, f.width, f.height}, true);
    svg::legend(out, tracks, 30, 36);
  } else {
    constexpr std::array<std::array<int, 2>, 3> planes{{{0, 1}, {0, 2}, {1, 2}}};
    constexpr const char* names[] = {"x-y", "x-z", "y-z"};
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='1260' height='460' viewBox='0 0 1260 460'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    for (int k = 0; k < 3; ++k) {
      const auto [ax, ay] = planes[static_cast<std::size_t>(k)];
      const auto e = svg::extent(env, tracks, target, ax, ay);
      const auto f = svg::fit(e[0], e[1], e[2], e[3], 20 + 420 * k, 40, 380, 400);
      out << "<text x='" << 20 + 420 * k << "' y='24' font-size='14'>" << names[k] << "</text>\n";
      svg::panel(out, env, levels, tracks, target, ax, ay, f, false);
    }
    svg::legend(out, tracks, 1100, 20);
  }
  out << "</svg>\n";
  return out.str();
}

/// Time series of |u| (log scale) and |v| for each track. Bands mark where the
/// first track's clearance margin is below eps2 (light) and eps1 (dark).
inline std::string plot_series(const std::vector<PlotTrack>& tracks, double eps1, double eps2) {
  std::ostringstream out;
  constexpr double kLeft = 70, kWidth = 820, kHeight = 240, kGap = 60;
  double t_end = 0, u_max = 1e-3, u_min = INFINITY, v_max = 1e-6;
  for (const auto& tr : tracks) {
    for (const auto& s : tr.trajectory->samples) {
      t_end = std::max(t_end, s.t);
      if (s.u.size() > 0) {
        const double u = s.u.norm();
        u_max = std::max(u_max, u);
        if (u > 0) u_min = std::min(u_min, u);
      }
      v_max = std::max(v_max, s.v.norm());
    }
  }
  t_end = std::max(t_end, 1e-9);
  const double lu_hi = std::ceil(std::log10(u_max));
  const double lu_lo = std::min(lu_hi - 1, std::floor(std::log10(std::max(u_min, u_max * 1e-6))));
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='920' height='" << svg::num(2 * kHeight + kGap + 80)
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  const auto panel_top = [&](int k) { return 30 + k * (kHeight + kGap); };
  const auto px = [&](double t) { return kLeft + t / t_end * kWidth; };
  if (!tracks.empty()) {
    const auto& s = tracks.front().trajectory->samples;
    for (const auto& [threshold, fill] : {std::pair{eps2, "#fde9c9"}, std::pair{eps1, "#f7b96b"}}) {
      if (threshold <= 0.0) continue;
      std::size_t i = 0;
      while (i < s.size()) {
        if (s[i].d >= threshold) {
          ++i;
          continue;
        }
        std::size_t j = i;
        while (j + 1 < s.size() && s[j + 1].d < threshold) ++j;
        for (int k = 0; k < 2; ++k) {
          out << "<rect x='" << svg::num(px(s[i].t)) << "' y='" << panel_top(k) << "' width='"
              << svg::num(std::max(1.0, px(s[j].t) - px(s[i].t))) << "' height='" << kHeight
              << "' fill='" << fill << "'/>\n";
        }
        i = j + 1;
      }
    }
  }
  for (int k = 0; k < 2; ++k) {
    out << "<rect x='" << kLeft << "' y='" << panel_top(k) << "' width='" << kWidth << "' height='"
        << kHeight << "' fill='none' stroke='#333'/>\n";
    out << "<text x='10' y='" << panel_top(k) + kHeight / 2 << "' font-size='13'>"
        << (k == 0 ? "|u|" : "|v|") << "</text>\n";
  }
  char label[64];
  std::snprintf(label, sizeof(label), "1e%g", lu_hi);
  out << "<text x='" << kLeft - 40 << "' y='" << panel_top(0) + 10 << "' font-size='10'>" << label << "</text>\n";
  std::snprintf(label, sizeof(label), "1e%g", lu_lo);
  out << "<text x='" << kLeft - 40 << "' y='" << panel_top(0) + kHeight << "' font-size='10'>" << label << "</text>\n";
  std::snprintf(label, sizeof(label), "%.3g", v_max);
  out << "<text x='" << kLeft - 40 << "' y='" << panel_top(1) + 10 << "' font-size='10'>" << label << "</text>\n";
  std::snprintf(label, sizeof(label), "t = %.3g s", t_end);
  out << "<text x='" << kLeft + kWidth - 70 << "' y='" << panel_top(1) + kHeight + 18 << "' font-size='11'>"
      << label << "</text>\n";
  for (const auto& tr : tracks) {
    std::string du, dv;
    bool first = true;
    for (const auto& s : tr.trajectory->samples) {
      if (s.u.size() == 0) continue;
      const double lu = std::clamp(std::log10(std::max(s.u.norm(), 1e-300)), lu_lo, lu_hi);
      const double yu = panel_top(0) + (lu_hi - lu) / (lu_hi - lu_lo) * kHeight;
      const double yv = panel_top(1) + (1.0 - s.v.norm() / v_max) * kHeight;
      du += (first ? "M" : "L") + svg::num(px(s.t)) + " " + svg::num(yu) + " ";
      dv += (first ? "M" : "L") + svg::num(px(s.t)) + " " + svg::num(yv) + " ";
      first = false;
    }
    for (const auto* d : {&du, &dv}) {
      out << "<path d='" << *d << "' fill='none' stroke='" << tr.color << "' stroke-width='1.2'/>\n";
    }
  }
  svg::legend(out, tracks, kLeft + kWidth - 120, 2 * kHeight + kGap + 60);
  out << "</svg>\n";
  return out.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

}  // namespace daf

#endif  // DAF_SVG_HPP_
