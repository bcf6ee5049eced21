#pragma once

#include <cstdint>

#include "json.hpp"

namespace elgrid {

/// Detector parameters: smoothing at 1% of the image extent, a 2-sigma
/// gradient threshold for module extrema, 1.5-sigma for patch extrema, and
/// a RANSAC inlier gate of 5% of the cell size.
struct DetectorConfig {
  double sigma_factor = 0.01;
  double module_threshold_k = 2.0;
  double patch_threshold_k = 1.5;
  double ransac_inlier_cell_fraction = 0.05;
  int ransac_iterations = 2000;
  double ransac_min_inlier_fraction = 0.25;
  double ransac_early_exit_fraction = 0.9;
  // Patch resolution in pixels per side; 0 sizes each module's patches from
  // the projected cell size so sub-pixel search keeps image resolution.
  int patch_px = 0;
  double orientation_margin = 0.05;
  uint64_t seed = 0;
};

inline void to_json(nlohmann::json& j, const DetectorConfig& c) {
  j = nlohmann::json{
      {"sigma_factor", c.sigma_factor},
      {"module_threshold_k", c.module_threshold_k},
      {"patch_threshold_k", c.patch_threshold_k},
      {"ransac_inlier_cell_fraction", c.ransac_inlier_cell_fraction},
      {"ransac_iterations", c.ransac_iterations},
      {"ransac_min_inlier_fraction", c.ransac_min_inlier_fraction},
      {"ransac_early_exit_fraction", c.ransac_early_exit_fraction},
      {"patch_px", c.patch_px},
      {"orientation_margin", c.orientation_margin},
      {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, DetectorConfig& c) {
  c = DetectorConfig{};
  c.sigma_factor = j.value("sigma_factor", c.sigma_factor);
  c.module_threshold_k = j.value("module_threshold_k", c.module_threshold_k);
  c.patch_threshold_k = j.value("patch_threshold_k", c.patch_threshold_k);
  c.ransac_inlier_cell_fraction =
      j.value("ransac_inlier_cell_fraction", c.ransac_inlier_cell_fraction);
  c.ransac_iterations = j.value("ransac_iterations", c.ransac_iterations);
  c.ransac_min_inlier_fraction =
      j.value("ransac_min_inlier_fraction", c.ransac_min_inlier_fraction);
  c.ransac_early_exit_fraction =
      j.value("ransac_early_exit_fraction", c.ransac_early_exit_fraction);
  c.patch_px = j.value("patch_px", c.patch_px);
  c.orientation_margin = j.value("orientation_margin", c.orientation_margin);
  c.seed = j.value("seed", c.seed);
}

}  // namespace elgrid
