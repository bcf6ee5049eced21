#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "elgrid/error.hpp"
#include "elgrid/image.hpp"

namespace elgrid {

using Polygon = std::vector<Point>;

inline double polygon_area(const Polygon& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % poly.size()];
    acc += a.x * b.y - b.x * a.y;
  }
  return std::abs(acc) / 2.0;
}

inline bool polygon_convex(const Polygon& poly) {
  const size_t n = poly.size();
  if (n < 3) return false;
  int sign = 0;
  for (size_t i = 0; i < n; ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % n];
    const Point& c = poly[(i + 2) % n];
    const double cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
    if (cross == 0.0) continue;
    const int s = cross > 0 ? 1 : -1;
    if (sign == 0)
      sign = s;
    else if (s != sign)
      return false;
  }
  return true;
}

namespace detail {

inline Polygon oriented_ccw(Polygon poly) {
  double acc = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % poly.size()];
    acc += a.x * b.y - b.x * a.y;
  }
  if (acc < 0.0) std::reverse(poly.begin(), poly.end());
  return poly;
}

// Sutherland-Hodgman clip of `subject` against a convex `clip` polygon
// (counter-clockwise orientation required for `clip`).
inline Polygon clip_convex(const Polygon& subject, const Polygon& clip) {
  Polygon out = subject;
  for (size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Point& ca = clip[e];
    const Point& cb = clip[(e + 1) % clip.size()];
    const auto inside = [&](const Point& p) {
      return (cb.x - ca.x) * (p.y - ca.y) - (cb.y - ca.y) * (p.x - ca.x) >=
             0.0;
    };
    const auto intersect = [&](const Point& p, const Point& q) {
      const double a1 = cb.y - ca.y, b1 = ca.x - cb.x;
      const double c1 = a1 * ca.x + b1 * ca.y;
      const double a2 = q.y - p.y, b2 = p.x - q.x;
      const double c2 = a2 * p.x + b2 * p.y;
      const double det = a1 * b2 - a2 * b1;
      if (std::abs(det) < 1e-300) return q;
      return Point{(b2 * c1 - b1 * c2) / det, (a1 * c2 - a2 * c1) / det};
    };
    Polygon in;
    in.swap(out);
    for (size_t v = 0; v < in.size(); ++v) {
      const Point& prev = in[(v + in.size() - 1) % in.size()];
      const Point& cur = in[v];
      const bool cur_in = inside(cur), prev_in = inside(prev);
      if (cur_in) {
        if (!prev_in) out.push_back(intersect(prev, cur));
        out.push_back(cur);
      } else if (prev_in) {
        out.push_back(intersect(prev, cur));
      }
    }
  }
  return out;
}

inline bool point_in_polygon(const Polygon& poly, double x, double y) {
  bool in = false;
  for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y > y) != (b.y > y) &&
        x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x)
      in = !in;
  }
  return in;
}

inline double intersection_by_raster(const Polygon& a, const Polygon& b) {
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (const Polygon* p : {&a, &b})
    for (const Point& v : *p) {
      lo_x = std::min(lo_x, v.x);
      hi_x = std::max(hi_x, v.x);
      lo_y = std::min(lo_y, v.y);
      hi_y = std::max(hi_y, v.y);
    }
  const double w = hi_x - lo_x, h = hi_y - lo_y;
  if (w <= 0 || h <= 0) return 0.0;
  const int n_long = 2048;
  int nx, ny;
  if (w >= h) {
    nx = n_long;
    ny = std::max(1, static_cast<int>(std::lround(n_long * h / w)));
  } else {
    ny = n_long;
    nx = std::max(1, static_cast<int>(std::lround(n_long * w / h)));
  }
  const double dx = w / nx, dy = h / ny;
  long hits = 0;
  for (int iy = 0; iy < ny; ++iy) {
    const double y = lo_y + (iy + 0.5) * dy;
    for (int ix = 0; ix < nx; ++ix) {
      const double x = lo_x + (ix + 0.5) * dx;
      if (point_in_polygon(a, x, y) && point_in_polygon(b, x, y)) ++hits;
    }
  }
  return static_cast<double>(hits) * dx * dy;
}

}  // namespace detail

/// Area IoU of two simple polygons. Convex pairs are clipped exactly
/// (Sutherland-Hodgman); otherwise the intersection is estimated by
/// rasterizing the joint bounding box.
inline double polygon_iou(const Polygon& a, const Polygon& b) {
  const double area_a = polygon_area(a), area_b = polygon_area(b);
  if (a.size() < 3 || b.size() < 3 || area_a <= 0.0 || area_b <= 0.0)
    raise(ErrorCode::InvalidArgument, "degenerate polygon");
  double inter;
  if (polygon_convex(a) && polygon_convex(b)) {
    inter = polygon_area(detail::clip_convex(detail::oriented_ccw(a),
                                             detail::oriented_ccw(b)));
  } else {
    inter = detail::intersection_by_raster(a, b);
  }
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

struct EvalRecord {
  std::string id;
  std::optional<Polygon> detected;
  Polygon truth;
  double iou = 0.0;  // 0 on miss
};

inline double record_iou(EvalRecord& r) {
  r.iou = r.detected ? polygon_iou(*r.detected, r.truth) : 0.0;
  return r.iou;
}

struct RecallCurve {
  std::vector<double> thresholds;
  std::vector<double> recalls;
  double auc = 0.0;  // raw trapezoidal integral over the threshold grid
};

inline std::vector<double> default_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 100; ++i) t.push_back(0.5 + 0.005 * i);
  return t;
}

/// recall(t) = fraction of records with IoU >= t, over the given grid.
inline RecallCurve recall_curve(
    const std::vector<EvalRecord>& records,
    std::vector<double> thresholds = default_iou_thresholds()) {
  if (records.empty())
    raise(ErrorCode::InvalidArgument, "no evaluation records");
  if (thresholds.size() < 2)
    raise(ErrorCode::InvalidArgument, "need at least two thresholds");
  std::sort(thresholds.begin(), thresholds.end());
  RecallCurve curve;
  curve.thresholds = std::move(thresholds);
  curve.recalls.reserve(curve.thresholds.size());
  for (double t : curve.thresholds) {
    long n = 0;
    for (const auto& r : records) n += r.iou >= t;
    curve.recalls.push_back(static_cast<double>(n) / records.size());
  }
  for (size_t i = 0; i + 1 < curve.thresholds.size(); ++i)
    curve.auc += 0.5 * (curve.recalls[i] + curve.recalls[i + 1]) *
                 (curve.thresholds[i + 1] - curve.thresholds[i]);
  return curve;
}

inline double recall_at(const std::vector<EvalRecord>& records, double t) {
  if (records.empty())
    raise(ErrorCode::InvalidArgument, "no evaluation records");
  long n = 0;
  for (const auto& r : records) n += r.iou >= t;
  return static_cast<double>(n) / records.size();
}

}  // namespace elgrid
