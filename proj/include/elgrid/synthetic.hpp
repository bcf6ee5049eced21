#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "elgrid/error.hpp"
#include "elgrid/geometry.hpp"
#include "elgrid/image.hpp"

#include "json.hpp"

namespace elgrid {

/// Procedural EL-like module scene with exact ground truth. Brightness
/// must satisfy background < ridge_level, busbar_level < cell_mean so the
/// rendered module reads like an EL measurement: bright cells, dark
/// separating lines, dark background.
struct SceneSpec {
  int n_cols = 10;
  int m_rows = 6;
  int width = 1200;
  int height = 900;

  double background = 0.12;
  double cell_mean = 0.78;
  double cell_jitter = 0.06;
  // Busbars read like ridges in EL images: close in both darkness and
  // width, which is what makes the even/odd selection necessary.
  double ridge_width = 0.04;   // cell units
  double ridge_level = 0.30;
  int busbars = 2;             // per cell, crossing the x axis
  double busbar_width = 0.032; // cell units
  double busbar_level = 0.32;
  double noise_sigma = 0.0;

  // Pose: either an explicit homography or tilt/rotation parameters.
  bool has_explicit_h = false;
  Homography explicit_h;
  double tilt_deg = 0.0;      // rotation about the vertical axis
  double focal = 2.5;         // relative focal length for the tilt camera
  double rotation_deg = 0.0;  // in-plane rotation
  double fill = 0.62;         // module extent as a fraction of min(w,h)
  double offset_x = 0.0;      // pixel offset of the module center
  double offset_y = 0.0;

  // Additional modules at model-space offsets (cell units); typically
  // partially outside the image.
  std::vector<Point> neighbor_offsets;
};

struct RenderedScene {
  GrayImage image{2, 2};
  Homography h_true;
  std::array<Point, 4> corners{};           // (0,0),(N,0),(N,M),(0,M)
  std::vector<Point> lattice;               // j-major, matches model_grid
  std::vector<std::array<Point, 4>> neighbor_corners;
};

/// Homography of a plane rotated by `angle_deg` about the vertical axis and
/// seen by a pinhole camera with relative focal length `focal`. The module
/// is centered: output coordinates are scaled so the projected bounding box
/// is centered at the origin with unit maximum extent.
inline Homography perspective_from_tilt(double angle_deg, double focal,
                                        int n_cols = 10, int m_rows = 6) {
  if (std::abs(angle_deg) >= 90.0)
    raise(ErrorCode::InvalidSceneSpec, "tilt angle must be within (-90, 90)");
  if (focal <= 0.0)
    raise(ErrorCode::InvalidSceneSpec, "focal must be positive");
  const double theta = angle_deg * M_PI / 180.0;
  const double f = focal * n_cols;  // world units
  const double d = focal * n_cols;  // camera distance
  const double cx = n_cols / 2.0, cy = m_rows / 2.0;

  Homography raw;
  raw.h = {f * std::cos(theta), 0.0, -f * std::cos(theta) * cx,
           0.0, f, -f * cy,
           -std::sin(theta), 0.0, d + std::sin(theta) * cx};

  // Center and scale the projected module box to unit maximum extent.
  const std::array<Point, 4> model_corners{
      Point{0, 0}, Point{static_cast<double>(n_cols), 0},
      Point{static_cast<double>(n_cols), static_cast<double>(m_rows)},
      Point{0, static_cast<double>(m_rows)}};
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (const auto& mc : model_corners) {
    const Point p = project(raw, mc);
    lo_x = std::min(lo_x, p.x);
    hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_y = std::max(hi_y, p.y);
  }
  const double extent = std::max(hi_x - lo_x, hi_y - lo_y);
  const double s = 1.0 / extent;
  Homography fit;
  fit.h = {s, 0, -s * 0.5 * (lo_x + hi_x), 0, s, -s * 0.5 * (lo_y + hi_y),
           0, 0, 1};
  return Homography::from_eigen(fit.to_eigen() * raw.to_eigen()).normalized();
}

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Deterministic per-cell brightness jitter in [-1,1].
inline double cell_hash(uint64_t seed, int module_idx, int ci, int cj) {
  uint64_t h = splitmix64(seed ^ (static_cast<uint64_t>(module_idx) << 48) ^
                          (static_cast<uint64_t>(static_cast<uint32_t>(ci))
                           << 20) ^
                          static_cast<uint32_t>(cj));
  return static_cast<double>(h >> 11) / static_cast<double>(1ull << 53) * 2.0 -
         1.0;
}

inline double shade_module(const SceneSpec& spec, uint64_t seed,
                           int module_idx, double u, double v) {
  const int ci = std::min(static_cast<int>(u), spec.n_cols - 1);
  const int cj = std::min(static_cast<int>(v), spec.m_rows - 1);
  // Interior separating lines; the outer border is a plain cell-to-
  // background transition.
  const double nearest_u = std::round(u);
  if (nearest_u >= 1 && nearest_u <= spec.n_cols - 1 &&
      std::abs(u - nearest_u) <= spec.ridge_width / 2)
    return spec.ridge_level;
  const double nearest_v = std::round(v);
  if (nearest_v >= 1 && nearest_v <= spec.m_rows - 1 &&
      std::abs(v - nearest_v) <= spec.ridge_width / 2)
    return spec.ridge_level;
  const double du = u - ci;
  for (int k = 1; k <= spec.busbars; ++k) {
    const double pos = static_cast<double>(k) / (spec.busbars + 1);
    if (std::abs(du - pos) <= spec.busbar_width / 2) return spec.busbar_level;
  }
  return spec.cell_mean +
         spec.cell_jitter * cell_hash(seed, module_idx, ci, cj);
}

inline Homography compose_pose(const SceneSpec& spec) {
  if (spec.has_explicit_h) return spec.explicit_h.normalized();
  const Homography persp = perspective_from_tilt(spec.tilt_deg, spec.focal,
                                                 spec.n_cols, spec.m_rows);
  const double phi = spec.rotation_deg * M_PI / 180.0;
  Homography rot;
  rot.h = {std::cos(phi), -std::sin(phi), 0,
           std::sin(phi), std::cos(phi), 0,
           0, 0, 1};
  const double s = spec.fill * std::min(spec.width, spec.height);
  Homography place;
  place.h = {s, 0, spec.width / 2.0 + spec.offset_x,
             0, s, spec.height / 2.0 + spec.offset_y,
             0, 0, 1};
  return Homography::from_eigen(place.to_eigen() * rot.to_eigen() *
                                persp.to_eigen())
      .normalized();
}

}  // namespace detail

/// Rasterizes the scene through the ground-truth homography with 2x2
/// supersampling and box filtering, then adds Gaussian noise. Deterministic
/// for a fixed seed; the emitted ground truth is exact (projected model
/// points, not rendered estimates).
inline RenderedScene render(const SceneSpec& spec, uint64_t seed) {
  if (spec.m_rows < 1 || spec.n_cols < spec.m_rows)
    raise(ErrorCode::InvalidSceneSpec, "require N >= M >= 1");
  if (spec.width < 16 || spec.height < 16)
    raise(ErrorCode::InvalidSceneSpec, "image too small");
  if (spec.noise_sigma < 0.0)
    raise(ErrorCode::InvalidSceneSpec, "noise sigma must be non-negative");
  if (!(spec.background < spec.ridge_level &&
        spec.ridge_level < spec.cell_mean &&
        spec.background < spec.busbar_level &&
        spec.busbar_level < spec.cell_mean))
    raise(ErrorCode::InvalidSceneSpec,
          "brightness ordering background < lines < cells violated");

  RenderedScene out;
  out.h_true = detail::compose_pose(spec);
  const double n = spec.n_cols, m = spec.m_rows;
  const std::array<Point, 4> model_corners{Point{0, 0}, Point{n, 0},
                                           Point{n, m}, Point{0, m}};
  for (int k = 0; k < 4; ++k) {
    out.corners[k] = project(out.h_true, model_corners[k]);
    if (out.corners[k].x < 1.0 || out.corners[k].x > spec.width - 2.0 ||
        out.corners[k].y < 1.0 || out.corners[k].y > spec.height - 2.0)
      raise(ErrorCode::InvalidSceneSpec,
            "module not fully visible under the ground-truth homography");
  }
  const ModelGrid grid = model_grid(spec.n_cols, spec.m_rows);
  out.lattice.reserve(grid.points.size());
  for (const auto& p : grid.points) out.lattice.push_back(project(out.h_true, p));
  for (const auto& off : spec.neighbor_offsets) {
    std::array<Point, 4> q{};
    for (int k = 0; k < 4; ++k)
      q[k] = project(out.h_true, {model_corners[k].x + off.x,
                                  model_corners[k].y + off.y});
    out.neighbor_corners.push_back(q);
  }

  const Homography h_inv = out.h_true.inverse();
  GrayImage img(spec.width, spec.height, spec.background);
  constexpr std::array<double, 2> sub{-0.25, 0.25};
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      double acc = 0.0;
      for (double dy : sub)
        for (double dx : sub) {
          const auto mp = try_project(h_inv, {x + dx, y + dy});
          double v = spec.background;
          if (mp) {
            if (mp->x >= 0 && mp->x <= n && mp->y >= 0 && mp->y <= m) {
              v = detail::shade_module(spec, seed, 0, mp->x, mp->y);
            } else {
              for (size_t k = 0; k < spec.neighbor_offsets.size(); ++k) {
                const double lu = mp->x - spec.neighbor_offsets[k].x;
                const double lv = mp->y - spec.neighbor_offsets[k].y;
                if (lu >= 0 && lu <= n && lv >= 0 && lv <= m) {
                  v = detail::shade_module(spec, seed, static_cast<int>(k) + 1,
                                           lu, lv);
                  break;
                }
              }
            }
          }
          acc += v;
        }
      img.at(x, y) = acc / 4.0;
    }
  }

  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(detail::splitmix64(seed ^ 0xE1C0DEull));
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (double& v : img.data()) v = std::clamp(v + noise(rng), 0.0, 1.0);
  }
  out.image = std::move(img);
  return out;
}

inline void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = nlohmann::json{{"cols", s.n_cols},
                     {"rows", s.m_rows},
                     {"width", s.width},
                     {"height", s.height},
                     {"background", s.background},
                     {"cell_mean", s.cell_mean},
                     {"cell_jitter", s.cell_jitter},
                     {"ridge_width", s.ridge_width},
                     {"ridge_level", s.ridge_level},
                     {"busbars", s.busbars},
                     {"busbar_width", s.busbar_width},
                     {"busbar_level", s.busbar_level},
                     {"noise_sigma", s.noise_sigma},
                     {"tilt_deg", s.tilt_deg},
                     {"focal", s.focal},
                     {"rotation_deg", s.rotation_deg},
                     {"fill", s.fill},
                     {"offset_x", s.offset_x},
                     {"offset_y", s.offset_y}};
  if (s.has_explicit_h) j["h"] = s.explicit_h.h;
  if (!s.neighbor_offsets.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& p : s.neighbor_offsets) arr.push_back({p.x, p.y});
    j["neighbors"] = arr;
  }
}

inline void from_json(const nlohmann::json& j, SceneSpec& s) {
  s = SceneSpec{};
  s.n_cols = j.value("cols", s.n_cols);
  s.m_rows = j.value("rows", s.m_rows);
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  s.background = j.value("background", s.background);
  s.cell_mean = j.value("cell_mean", s.cell_mean);
  s.cell_jitter = j.value("cell_jitter", s.cell_jitter);
  s.ridge_width = j.value("ridge_width", s.ridge_width);
  s.ridge_level = j.value("ridge_level", s.ridge_level);
  s.busbars = j.value("busbars", s.busbars);
  s.busbar_width = j.value("busbar_width", s.busbar_width);
  s.busbar_level = j.value("busbar_level", s.busbar_level);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.tilt_deg = j.value("tilt_deg", s.tilt_deg);
  s.focal = j.value("focal", s.focal);
  s.rotation_deg = j.value("rotation_deg", s.rotation_deg);
  s.fill = j.value("fill", s.fill);
  s.offset_x = j.value("offset_x", s.offset_x);
  s.offset_y = j.value("offset_y", s.offset_y);
  if (j.contains("h")) {
    s.has_explicit_h = true;
    const auto arr = j.at("h");
    for (int i = 0; i < 9; ++i) s.explicit_h.h[i] = arr.at(i).get<double>();
  }
  if (j.contains("neighbors"))
    for (const auto& e : j.at("neighbors"))
      s.neighbor_offsets.push_back({e.at(0).get<double>(),
                                    e.at(1).get<double>()});
}

}  // namespace elgrid
