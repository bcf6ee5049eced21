#pragma once

#include <array>
#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include "elgrid/config.hpp"
#include "elgrid/crossing_detection.hpp"
#include "elgrid/error.hpp"
#include "elgrid/geometry.hpp"
#include "elgrid/image.hpp"
#include "elgrid/module_detection.hpp"

namespace elgrid {

struct StageTimings {
  double module_ms = 0.0;
  double patches_ms = 0.0;
  double ransac_ms = 0.0;
  double total_ms = 0.0;
};

struct DetectionResult {
  std::array<Point, 4> module_corners{};  // from the 1-D statistics stage
  Homography h0;
  Homography h;
  CrossingSet crossings;
  StageTimings timings;
  DetectorConfig config;
  int rows = 0;
  int cols = 0;

  /// Module outline under the refined homography.
  std::array<Point, 4> refined_corners() const {
    const double n = cols, m = rows;
    return {project(h, {0, 0}), project(h, {n, 0}), project(h, {n, m}),
            project(h, {0, m})};
  }
};

namespace detail {

[[noreturn]] inline void rethrow_with_stage(const Error& e,
                                            const std::string& stage) {
  throw Error(e.code(), e.message(), e.stage().empty() ? stage : e.stage());
}

inline std::vector<Correspondence> corner_correspondences(
    const std::array<Point, 4>& corners, int n_cols, int m_rows, int shift) {
  const double n = n_cols, m = m_rows;
  const std::array<Point, 4> model{Point{0, 0}, Point{n, 0}, Point{n, m},
                                   Point{0, m}};
  std::vector<Correspondence> cs(4);
  for (int k = 0; k < 4; ++k)
    cs[k] = {model[k], corners[(k + shift) % 4], true};
  return cs;
}

}  // namespace detail

/// End-to-end detection: locate the module from 1-D statistics, estimate
/// the initial homography from the four corner correspondences, refine the
/// lattice by local patch search and RANSAC.
///
/// The long-side convention maps (b1,b2) to the model's N axis. Under
/// strong foreshortening the physically long side can appear shorter in the
/// image, so when the first assignment yields a weak consensus the rotated
/// assignment is tried and the better fit kept.
inline DetectionResult detect(const GrayImage& img, int n_cols, int m_rows,
                              const DetectorConfig& cfg = {}) {
  if (m_rows < 1 || n_cols < m_rows)
    raise(ErrorCode::InvalidArgument, "require N >= M >= 1", "configuration");
  const auto t_start = std::chrono::steady_clock::now();

  DetectionResult result;
  result.config = cfg;
  result.rows = m_rows;
  result.cols = n_cols;

  auto t0 = std::chrono::steady_clock::now();
  ModuleDetection module;
  try {
    module = detect_module(img, cfg);
  } catch (const Error& e) {
    detail::rethrow_with_stage(e, "module-detection");
  }
  result.module_corners = module.corners;
  result.timings.module_ms = detail::ms_since(t0);

  const ModelGrid grid = model_grid(n_cols, m_rows);

  const auto attempt = [&](int shift) {
    Homography h0;
    try {
      h0 = dlt(detail::corner_correspondences(module.corners, n_cols, m_rows,
                                              shift));
    } catch (const Error& e) {
      detail::rethrow_with_stage(e, "initial-homography");
    }
    CrossingSet cset = detect_all_crossings(img, h0, grid, cfg);
    return std::make_pair(h0, std::move(cset));
  };

  std::pair<Homography, CrossingSet> first, chosen;
  bool first_ok = false;
  try {
    first = attempt(0);
    first_ok = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientConsensus &&
        e.code() != ErrorCode::PointAtInfinity)
      detail::rethrow_with_stage(e, "crossing-detection");
  }

  const double frac =
      first_ok ? static_cast<double>(first.second.consensus_size) /
                     first.second.entries.size()
               : 0.0;
  double patches_ms = first_ok ? first.second.patches_ms : 0.0;
  double ransac_ms = first_ok ? first.second.ransac_ms : 0.0;
  if (first_ok && frac >= 0.5) {
    chosen = std::move(first);
  } else {
    // Weak fit; the long side may be foreshortened. Try the rotated
    // corner-to-model assignment and keep the better consensus.
    bool second_ok = false;
    std::pair<Homography, CrossingSet> second;
    try {
      second = attempt(1);
      second_ok = true;
      patches_ms += second.second.patches_ms;
      ransac_ms += second.second.ransac_ms;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientConsensus &&
          e.code() != ErrorCode::PointAtInfinity)
        detail::rethrow_with_stage(e, "crossing-detection");
    }
    if (!first_ok && !second_ok)
      raise(ErrorCode::InsufficientConsensus,
            "no corner assignment yields a consistent crossing consensus",
            "ransac");
    if (!first_ok || (second_ok && second.second.consensus_size >
                                       first.second.consensus_size))
      chosen = std::move(second);
    else
      chosen = std::move(first);
  }

  result.h0 = chosen.first;
  result.crossings = std::move(chosen.second);
  result.h = result.crossings.refined_h;
  result.timings.patches_ms = patches_ms;
  result.timings.ransac_ms = ransac_ms;
  result.timings.total_ms = detail::ms_since(t_start);
  return result;
}

/// Warps every model cell square to a cell_px x cell_px image through H.
/// Cells are returned row-major: index j * N + i for cell (i, j).
inline std::vector<GrayImage> extract_cells(const GrayImage& img,
                                            const Homography& h, int n_cols,
                                            int m_rows, int cell_px) {
  if (cell_px <= 0)
    raise(ErrorCode::InvalidArgument, "cell_px must be positive");
  if (n_cols < 1 || m_rows < 1)
    raise(ErrorCode::InvalidArgument, "invalid cell grid");
  std::vector<GrayImage> cells;
  cells.reserve(static_cast<size_t>(n_cols) * m_rows);
  for (int j = 0; j < m_rows; ++j) {
    for (int i = 0; i < n_cols; ++i) {
      GrayImage cell(cell_px, cell_px);
      for (int q = 0; q < cell_px; ++q) {
        const double v = j + (q + 0.5) / cell_px;
        for (int p = 0; p < cell_px; ++p) {
          const double u = i + (p + 0.5) / cell_px;
          const Point ip = project(h, {u, v});
          cell.at(p, q) = bilinear_sample(img, ip.x, ip.y);
        }
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

}  // namespace elgrid
