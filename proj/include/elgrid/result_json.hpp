#pragma once

#include <array>
#include <optional>
#include <string>

#include "elgrid/error.hpp"
#include "elgrid/pipeline.hpp"

#include "json.hpp"

namespace elgrid {

inline constexpr int kResultSchemaVersion = 1;

/// Detection result as the stable JSON schema. Coordinates are pixels,
/// zero-based, x rightward and y downward; homographies are row-major,
/// Frobenius-normalized with a non-negative last element.
inline nlohmann::json result_to_json(const DetectionResult& r,
                                     const std::string& image_id) {
  nlohmann::json j;
  j["schema_version"] = kResultSchemaVersion;
  j["image"] = image_id;
  j["rows"] = r.rows;
  j["cols"] = r.cols;
  auto corners = nlohmann::json::array();
  for (const Point& p : r.refined_corners()) corners.push_back({p.x, p.y});
  j["corners"] = corners;
  j["h0"] = r.h0.normalized().h;
  j["h"] = r.h.normalized().h;
  auto crossings = nlohmann::json::array();
  for (const auto& e : r.crossings.entries) {
    nlohmann::json c{{"i", e.i}, {"j", e.j}};
    if (e.image) {
      c["x"] = e.image->x;
      c["y"] = e.image->y;
      c["inlier"] = e.inlier;
      c["residual"] = e.residual;
    } else {
      c["miss"] = true;
    }
    crossings.push_back(c);
  }
  j["crossings"] = crossings;
  j["timings_ms"] = {{"module", r.timings.module_ms},
                     {"patches", r.timings.patches_ms},
                     {"ransac", r.timings.ransac_ms},
                     {"total", r.timings.total_ms}};
  return j;
}

inline nlohmann::json failure_to_json(const std::string& image_id, int rows,
                                      int cols, const Error& e) {
  nlohmann::json j;
  j["schema_version"] = kResultSchemaVersion;
  j["image"] = image_id;
  j["rows"] = rows;
  j["cols"] = cols;
  j["error"] = {{"code", error_code_name(e.code())},
                {"stage", e.stage()},
                {"message", e.message()}};
  return j;
}

/// Detected module outline from a result file; nullopt when the file
/// records a failure.
inline std::optional<std::array<Point, 4>> corners_from_result(
    const nlohmann::json& j) {
  if (j.contains("error") || !j.contains("corners")) return std::nullopt;
  const auto& arr = j.at("corners");
  if (arr.size() != 4)
    raise(ErrorCode::InvalidArgument, "corners field must have 4 points");
  std::array<Point, 4> out{};
  for (int k = 0; k < 4; ++k)
    out[k] = {arr.at(k).at(0).get<double>(), arr.at(k).at(1).get<double>()};
  return out;
}

}  // namespace elgrid
