#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "elgrid/config.hpp"
#include "elgrid/error.hpp"
#include "elgrid/geometry.hpp"
#include "elgrid/image.hpp"
#include "elgrid/module_detection.hpp"

namespace elgrid {

enum class AxisFeature { Ridge, EdgeLeading, EdgeTrailing };

/// What the 1-D statistics of a crossing patch should show on each axis,
/// known a priori from the lattice position.
struct CrossingType {
  AxisFeature x_axis = AxisFeature::Ridge;
  AxisFeature y_axis = AxisFeature::Ridge;
};

inline CrossingType classify_crossing(int i, int j, int n_cols, int m_rows) {
  if (i < 0 || i > n_cols || j < 0 || j > m_rows)
    raise(ErrorCode::InvalidArgument, "lattice index out of range");
  CrossingType t;
  t.x_axis = i == 0 ? AxisFeature::EdgeLeading
             : i == n_cols ? AxisFeature::EdgeTrailing
                           : AxisFeature::Ridge;
  t.y_axis = j == 0 ? AxisFeature::EdgeLeading
             : j == m_rows ? AxisFeature::EdgeTrailing
                           : AxisFeature::Ridge;
  return t;
}

/// Approximate cell size in pixels: distance between the projections of two
/// diagonally adjacent lattice points. Only valid near (i,j).
inline double cell_size(const Homography& h, int i, int j) {
  const Point a = project(h, {static_cast<double>(i), static_cast<double>(j)});
  const Point b = project(h, {static_cast<double>(i + 1),
                              static_cast<double>(j + 1)});
  return distance(a, b);
}

/// Rectified square patch around a model point, covering one model cell.
/// Patch pixel (p,q) has its center at model coordinates model_of(p,q); the
/// stored homography maps model coordinates back to image pixels.
struct Patch {
  GrayImage pixels{2, 2};
  Point center_model;
  int patch_px = 0;
  Homography h;
  double clamped_fraction = 0.0;

  Point model_of(double p, double q) const {
    return {center_model.x - 0.5 + (p + 0.5) / patch_px,
            center_model.y - 0.5 + (q + 0.5) / patch_px};
  }
};

/// Samples the model square [m - 0.5, m + 0.5] per axis on a regular
/// patch_px grid through H with bilinear interpolation. Samples outside the
/// image are edge-clamped and counted; more than half outside raises
/// PatchOutsideImage.
inline Patch extract_patch(const GrayImage& img, const Homography& h,
                           const Point& m, int patch_px) {
  if (patch_px < 8)
    raise(ErrorCode::InvalidArgument, "patch resolution too small");
  Patch patch;
  patch.center_model = m;
  patch.patch_px = patch_px;
  patch.h = h;
  patch.pixels = GrayImage(patch_px, patch_px);

  const double w = img.width(), hgt = img.height();
  long outside = 0;
  for (int q = 0; q < patch_px; ++q) {
    const double v = m.y - 0.5 + (q + 0.5) / patch_px;
    for (int p = 0; p < patch_px; ++p) {
      const double u = m.x - 0.5 + (p + 0.5) / patch_px;
      const auto ip = try_project(h, {u, v});
      if (!ip || ip->x < -0.5 || ip->x > w - 0.5 || ip->y < -0.5 ||
          ip->y > hgt - 0.5) {
        ++outside;
        patch.pixels.at(p, q) =
            ip ? bilinear_sample(img, ip->x, ip->y) : 0.0;
      } else {
        patch.pixels.at(p, q) = bilinear_sample(img, ip->x, ip->y);
      }
    }
  }
  patch.clamped_fraction =
      static_cast<double>(outside) / (static_cast<double>(patch_px) * patch_px);
  if (patch.clamped_fraction > 0.5)
    raise(ErrorCode::PatchOutsideImage,
          "more than half of the patch samples fall outside the image");
  return patch;
}

/// Ridge position on a patch axis: all (minimum directly followed by
/// maximum) pairs are collected; with an odd count the middle pair is the
/// separating line (busbars come in even counts on symmetric cells) and the
/// sub-sample zero crossing of the gradient between the pair is returned.
/// An even count means the heuristic does not apply and the point is
/// dropped.
inline std::optional<double> detect_ridge(const Signal1D& grad, double k,
                                          int nms_window = 0) {
  const auto extrema = find_extrema(grad, k, nms_window);
  struct Pair {
    int min_idx, max_idx;
  };
  std::vector<Pair> pairs;
  for (size_t t = 0; t + 1 < extrema.size(); ++t)
    if (extrema[t].kind == ExtremumKind::Minimum &&
        extrema[t + 1].kind == ExtremumKind::Maximum)
      pairs.push_back({extrema[t].index, extrema[t + 1].index});
  if (pairs.empty() || pairs.size() % 2 == 0) return std::nullopt;

  const Pair mid = pairs[pairs.size() / 2];
  for (int i = mid.min_idx; i < mid.max_idx; ++i) {
    if (grad[i] <= 0.0 && grad[i + 1] > 0.0) {
      const double t = -grad[i] / (grad[i + 1] - grad[i]);
      return i + t;
    }
  }
  return (mid.min_idx + mid.max_idx) / 2.0;
}

/// Edge position on a patch axis: the extremum of the required polarity
/// closest to the patch center, refined by a parabolic fit over the
/// neighboring gradient samples.
inline std::optional<double> detect_edge(const Signal1D& grad,
                                         AxisFeature side, double k,
                                         int nms_window = 0) {
  if (side == AxisFeature::Ridge)
    raise(ErrorCode::InvalidArgument, "edge detector given a ridge axis");
  const auto extrema = find_extrema(grad, k, nms_window);
  const ExtremumKind want = side == AxisFeature::EdgeLeading
                                ? ExtremumKind::Maximum
                                : ExtremumKind::Minimum;
  const double center = (grad.size() - 1) / 2.0;
  const Extremum* best = nullptr;
  for (const auto& e : extrema) {
    if (e.kind != want) continue;
    if (!best ||
        std::abs(e.index - center) < std::abs(best->index - center))
      best = &e;
  }
  if (!best) return std::nullopt;

  const int i = best->index;
  if (i > 0 && i + 1 < grad.size()) {
    const double a = grad[i - 1], b = grad[i], c = grad[i + 1];
    const double denom = a - 2 * b + c;
    if (std::abs(denom) > 1e-12) {
      const double offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
      return i + offset;
    }
  }
  return static_cast<double>(i);
}

/// Runs the per-axis detectors on a patch's 1-D statistics and maps the
/// found position back to image coordinates. A miss on either axis is a
/// miss for the point.
inline std::optional<Point> detect_crossing(const Patch& patch,
                                            const CrossingType& type,
                                            const DetectorConfig& cfg = {}) {
  const double sigma = cfg.sigma_factor * patch.patch_px;
  const int window = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  const Signal1D grad_x = smoothed_gradient(col_sum(patch.pixels), sigma);
  const Signal1D grad_y = smoothed_gradient(row_sum(patch.pixels), sigma);

  const auto along = [&](const Signal1D& g,
                         AxisFeature f) -> std::optional<double> {
    if (f == AxisFeature::Ridge)
      return detect_ridge(g, cfg.patch_threshold_k, window);
    return detect_edge(g, f, cfg.patch_threshold_k, window);
  };
  const auto px = along(grad_x, type.x_axis);
  if (!px) return std::nullopt;
  const auto py = along(grad_y, type.y_axis);
  if (!py) return std::nullopt;

  const Point model_pt = patch.model_of(*px, *py);
  const auto img_pt = try_project(patch.h, model_pt);
  if (!img_pt) return std::nullopt;
  return *img_pt;
}

struct CrossingEntry {
  int i = 0;
  int j = 0;
  Point model;
  std::optional<Point> image;  // nullopt = dropped / patch failure
  bool inlier = false;
  double residual = 0.0;  // pixels under the refined H, hits only
};

struct CrossingSet {
  std::vector<CrossingEntry> entries;  // one per lattice point, j-major
  Homography refined_h;
  double error = 0.0;  // cell-count-normalized squared error over inliers
  int consensus_size = 0;
  int detected_count = 0;
  int patch_px_used = 0;
  double cell_px = 0.0;
  double patches_ms = 0.0;
  double ransac_ms = 0.0;
};

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace detail

/// Local search around every initial lattice prediction, then robust
/// refinement: extract a rectified patch per model point, run the 1-D
/// crossing detectors, and fit the final homography with RANSAC over all
/// detected correspondences.
inline CrossingSet detect_all_crossings(const GrayImage& img,
                                        const Homography& h0,
                                        const ModelGrid& grid,
                                        const DetectorConfig& cfg = {}) {
  auto t0 = std::chrono::steady_clock::now();
  CrossingSet out;
  const int ci = std::min(grid.cols / 2, grid.cols - 1);
  const int cj = std::min(grid.rows / 2, grid.rows - 1);
  out.cell_px = cell_size(h0, ci, cj);
  const int patch_px =
      cfg.patch_px > 0
          ? cfg.patch_px
          : std::clamp(static_cast<int>(std::lround(out.cell_px)), 24, 384);
  out.patch_px_used = patch_px;

  // Pure per-point work, aggregated in lattice order; entries are
  // independent so this loop can be mapped in parallel without changing
  // the result.
  out.entries.resize(grid.points.size());
  for (int j = 0; j <= grid.rows; ++j) {
    for (int i = 0; i <= grid.cols; ++i) {
      CrossingEntry e;
      e.i = i;
      e.j = j;
      e.model = grid.at(i, j);
      try {
        const Patch patch = extract_patch(img, h0, e.model, patch_px);
        const CrossingType type =
            classify_crossing(i, j, grid.cols, grid.rows);
        e.image = detect_crossing(patch, type, cfg);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::PatchOutsideImage) throw;
        e.image = std::nullopt;
      }
      out.entries[grid.index(i, j)] = std::move(e);
    }
  }

  std::vector<Correspondence> cs;
  std::vector<int> entry_of;
  for (size_t t = 0; t < out.entries.size(); ++t) {
    if (out.entries[t].image) {
      cs.push_back({out.entries[t].model, *out.entries[t].image, false});
      entry_of.push_back(static_cast<int>(t));
    }
  }
  out.detected_count = static_cast<int>(cs.size());
  out.patches_ms = detail::ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  RansacConfig rc;
  rc.iterations = cfg.ransac_iterations;
  rc.min_inlier_fraction = cfg.ransac_min_inlier_fraction;
  rc.inlier_cell_fraction = cfg.ransac_inlier_cell_fraction;
  rc.early_exit_fraction = cfg.ransac_early_exit_fraction;
  rc.seed = cfg.seed;
  const RansacResult fit =
      ransac_refit(cs, grid.cols, grid.rows, out.cell_px, rc);

  out.refined_h = fit.h;
  out.error = fit.error;
  out.consensus_size = 0;
  for (size_t k = 0; k < cs.size(); ++k) {
    auto& e = out.entries[entry_of[k]];
    e.inlier = fit.inliers[k];
    out.consensus_size += e.inlier;
    const auto p = try_project(fit.h, e.model);
    e.residual = p ? distance(*p, *e.image)
                   : std::numeric_limits<double>::infinity();
  }
  out.ransac_ms = detail::ms_since(t0);
  return out;
}

}  // namespace elgrid
