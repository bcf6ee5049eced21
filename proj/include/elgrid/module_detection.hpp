#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "elgrid/config.hpp"
#include "elgrid/error.hpp"
#include "elgrid/image.hpp"

namespace elgrid {

enum class ExtremumKind { Maximum, Minimum };

/// A thresholded, suppression-surviving peak of a gradient signal, together
/// with the index range over which the peak vanishes. `half_left` and
/// `half_right` are the sub-sample half-maximum crossings, which localize
/// the underlying edge span much more tightly than the vanish points, and
/// `pos` is the parabola-refined peak position.
struct Extremum {
  int index = 0;
  ExtremumKind kind = ExtremumKind::Maximum;
  double value = 0.0;
  int span_left = 0;
  int span_right = 0;
  double pos = 0.0;
  double half_left = 0.0;
  double half_right = 0.0;
};

/// Fraction of the peak magnitude below which the peak counts as vanished
/// when walking outward from the extremum.
inline constexpr double kVanishFraction = 0.1;

/// Walks outward from a local extremum until the signed gradient falls to
/// kVanishFraction of the peak magnitude or flips sign, clamping at the
/// signal ends. Returns the first qualifying index on each side.
inline std::pair<int, int> peak_span(const Signal1D& grad, int index,
                                     ExtremumKind kind) {
  const int n = grad.size();
  if (index < 0 || index >= n)
    raise(ErrorCode::InvalidArgument, "extremum index out of range");
  const double sign = kind == ExtremumKind::Maximum ? 1.0 : -1.0;
  const double vanish = kVanishFraction * std::abs(grad[index]);

  int left = 0;
  for (int i = index - 1; i >= 0; --i) {
    if (sign * grad[i] <= vanish) {
      left = i;
      break;
    }
  }
  int right = n - 1;
  for (int i = index + 1; i < n; ++i) {
    if (sign * grad[i] <= vanish) {
      right = i;
      break;
    }
  }
  return {left, right};
}

namespace detail {

// Sub-sample crossing of signed level `level` walking outward from the
// peak; clamps to the signal end when the signal never drops that far.
inline double level_crossing(const Signal1D& grad, int index, double sign,
                             double level, int step) {
  const int n = grad.size();
  double prev = sign * grad[index];
  for (int i = index + step; i >= 0 && i < n; i += step) {
    const double cur = sign * grad[i];
    if (cur <= level) {
      const double t = prev > cur ? (prev - level) / (prev - cur) : 1.0;
      return (i - step) + step * t;
    }
    prev = cur;
  }
  return step < 0 ? 0.0 : static_cast<double>(n - 1);
}

inline double parabolic_peak(const Signal1D& grad, int i) {
  if (i <= 0 || i + 1 >= grad.size()) return i;
  const double a = grad[i - 1], b = grad[i], c = grad[i + 1];
  const double denom = a - 2 * b + c;
  if (std::abs(denom) < 1e-12) return i;
  return i + std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
}

inline double stddev(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= v.size();
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / v.size());
}

inline int default_nms_window(const Signal1D& sig) {
  const int extent = std::max(sig.source_width, sig.source_height);
  return std::max(1, static_cast<int>(std::ceil(3.0 * 0.01 * extent)));
}

}  // namespace detail

/// Thresholded extrema of a gradient signal: every sample beyond
/// +-k*std(grad) that survives non-maximum/minimum suppression over the
/// given window. Runs of same-kind survivors with no sub-threshold gap
/// between them collapse to the strongest member. Result is index-ordered.
inline std::vector<Extremum> find_extrema(const Signal1D& grad, double k,
                                          int nms_window = 0) {
  if (grad.size() == 0)
    raise(ErrorCode::InvalidArgument, "empty gradient signal");
  if (k <= 0.0) raise(ErrorCode::InvalidArgument, "threshold multiplier <= 0");
  const int n = grad.size();
  const int window = nms_window > 0 ? nms_window : detail::default_nms_window(grad);
  const double sigma_k = detail::stddev(grad.values);
  const double threshold = k * sigma_k;
  if (!(threshold > 0.0)) return {};

  std::vector<Extremum> raw;
  for (int i = 0; i < n; ++i) {
    const double v = grad[i];
    if (v <= threshold && v >= -threshold) continue;
    const bool is_max = v > 0.0;
    bool keep = true;
    const int lo = std::max(0, i - window), hi = std::min(n - 1, i + window);
    for (int j = lo; j <= hi && keep; ++j) {
      if (j == i) continue;
      const double u = grad[j];
      if (is_max) {
        // Ties break toward the lower index.
        if (u > v || (u == v && j < i)) keep = false;
      } else {
        if (u < v || (u == v && j < i)) keep = false;
      }
    }
    if (keep)
      raw.push_back({i, is_max ? ExtremumKind::Maximum : ExtremumKind::Minimum,
                     v, 0, 0});
  }

  // Collapse same-kind neighbors unless the signal dips below the threshold
  // somewhere between them (two separate peaks of one kind).
  std::vector<Extremum> collapsed;
  for (const auto& e : raw) {
    if (!collapsed.empty() && collapsed.back().kind == e.kind) {
      bool gap = false;
      const double s = e.kind == ExtremumKind::Maximum ? 1.0 : -1.0;
      for (int j = collapsed.back().index + 1; j < e.index; ++j)
        if (s * grad[j] < threshold) {
          gap = true;
          break;
        }
      if (!gap) {
        if (std::abs(e.value) > std::abs(collapsed.back().value))
          collapsed.back() = e;
        continue;
      }
    }
    collapsed.push_back(e);
  }

  for (auto& e : collapsed) {
    const auto [l, r] = peak_span(grad, e.index, e.kind);
    e.span_left = l;
    e.span_right = r;
    const double sign = e.kind == ExtremumKind::Maximum ? 1.0 : -1.0;
    const double half = 0.5 * std::abs(e.value);
    e.pos = detail::parabolic_peak(grad, e.index);
    e.half_left = detail::level_crossing(grad, e.index, sign, half, -1);
    e.half_right = detail::level_crossing(grad, e.index, sign, half, +1);
  }
  return collapsed;
}

/// The maximum/minimum pair delimiting the one fully visible module on an
/// axis: same-kind runs collapse to their strongest member, then among all
/// (maximum, directly following minimum) pairs the one with the largest
/// index distance wins.
struct AxisPair {
  Extremum max_peak;
  Extremum min_peak;
};

inline AxisPair select_module(const std::vector<Extremum>& extrema) {
  std::vector<Extremum> seq;
  for (const auto& e : extrema) {
    if (!seq.empty() && seq.back().kind == e.kind) {
      if (std::abs(e.value) > std::abs(seq.back().value)) seq.back() = e;
      continue;
    }
    seq.push_back(e);
  }
  bool found = false;
  AxisPair best{};
  int best_dist = -1;
  for (size_t i = 0; i + 1 < seq.size(); ++i) {
    if (seq[i].kind == ExtremumKind::Maximum &&
        seq[i + 1].kind == ExtremumKind::Minimum) {
      const int dist = seq[i + 1].index - seq[i].index;
      if (dist > best_dist) {
        best_dist = dist;
        best = {seq[i], seq[i + 1]};
        found = true;
      }
    }
  }
  if (!found)
    raise(ErrorCode::NoModuleFound,
          "no maximum followed by a minimum in the gradient extrema");
  return best;
}

struct Box {
  double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;

  double width() const { return x_hi - x_lo; }
  double height() const { return y_hi - y_lo; }
  // Corner order: bottom-left, bottom-right, top-right, top-left
  // (y grows downward).
  std::array<Point, 4> corners() const {
    return {Point{x_lo, y_hi}, Point{x_hi, y_hi}, Point{x_hi, y_lo},
            Point{x_lo, y_lo}};
  }
};

/// Outer box from the outer span endpoints, inner box from the inner ones.
/// The source extrema are kept for the corner search.
struct BoundingBoxPair {
  Box outer;
  Box inner;
  Extremum x_max, x_min, y_max, y_min;
};

inline BoundingBoxPair bounding_boxes(const AxisPair& x_axis,
                                      const AxisPair& y_axis) {
  BoundingBoxPair out;
  out.x_max = x_axis.max_peak;
  out.x_min = x_axis.min_peak;
  out.y_max = y_axis.max_peak;
  out.y_min = y_axis.min_peak;
  out.outer = {static_cast<double>(out.x_max.span_left),
               static_cast<double>(out.x_min.span_right),
               static_cast<double>(out.y_max.span_left),
               static_cast<double>(out.y_min.span_right)};
  out.inner = {static_cast<double>(out.x_max.span_right),
               static_cast<double>(out.x_min.span_left),
               static_cast<double>(out.y_max.span_right),
               static_cast<double>(out.y_min.span_left)};
  if (out.inner.width() <= 0.0 || out.inner.height() <= 0.0)
    raise(ErrorCode::DegenerateBox,
          "inner bounding box has non-positive area (crossed peak spans)");
  return out;
}

struct DetectionConfidence {
  double contrast = 0.0;          // module interior vs. background
  double orientation_margin = 0.0;  // winning pose vs. runner-up
  double peak_snr = 0.0;          // weakest peak over its threshold
};

/// Four module corners ordered so (b1,b2) and (b3,b4) are the long sides,
/// plus diagnostic ratios.
struct ModuleDetection {
  std::array<Point, 4> corners{};
  DetectionConfidence confidence;
};

namespace detail {

struct RegionMean {
  double sum = 0.0;
  long count = 0;
  double mean(double fallback = 0.0) const {
    return count > 0 ? sum / count : fallback;
  }
};

inline RegionMean region_mean(const GrayImage& img, double x0, double x1,
                              double y0, double y1, int stride) {
  RegionMean r;
  const int xa = std::max(0, static_cast<int>(std::ceil(x0)));
  const int xb = std::min(img.width() - 1, static_cast<int>(std::floor(x1)));
  const int ya = std::max(0, static_cast<int>(std::ceil(y0)));
  const int yb = std::min(img.height() - 1, static_cast<int>(std::floor(y1)));
  for (int y = ya; y <= yb; y += stride)
    for (int x = xa; x <= xb; x += stride) {
      r.sum += img.at(x, y);
      ++r.count;
    }
  return r;
}

inline bool in_convex_quad(const std::array<Point, 4>& q, double x, double y) {
  double ref = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Point& a = q[i];
    const Point& b = q[(i + 1) % 4];
    const double cross = (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
    if (cross == 0.0) continue;
    if (ref == 0.0)
      ref = cross;
    else if ((cross > 0) != (ref > 0))
      return false;
  }
  return true;
}

inline double quad_area(const std::array<Point, 4>& q) {
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Point& a = q[i];
    const Point& b = q[(i + 1) % 4];
    acc += a.x * b.y - b.x * a.y;
  }
  return std::abs(acc) / 2.0;
}

inline bool convex_simple(const std::array<Point, 4>& q) {
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const Point& a = q[i];
    const Point& b = q[(i + 1) % 4];
    const Point& c = q[(i + 2) % 4];
    const double cross =
        (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
    if (cross == 0.0) return false;
    const int s = cross > 0 ? 1 : -1;
    if (sign == 0)
      sign = s;
    else if (s != sign)
      return false;
  }
  return true;
}

}  // namespace detail

/// Resolves the corner ambiguity left by the 1-D summation. Candidate poses
/// are built from the peak spans: the two diagonal configurations of an
/// in-plane-rotated module, the side configurations of a tilted one, and the
/// axis-aligned reading of the peak locations. Each candidate quadrilateral
/// is scored by the intensity contrast it explains inside the ring between
/// the outer and inner boxes; the axis-aligned reading wins ties, which also
/// covers the coincident-box case. Raises AmbiguousOrientation when the
/// image shows no module contrast at all.
inline ModuleDetection disambiguate_corners(const GrayImage& img,
                                            const BoundingBoxPair& boxes,
                                            double margin = 0.05) {
  const Box& o = boxes.outer;
  const Box& in = boxes.inner;
  const int stride_in =
      std::max(1, static_cast<int>(std::min(in.width(), in.height())) / 192);

  // Module-vs-background contrast gate.
  const auto inside = detail::region_mean(img, in.x_lo, in.x_hi, in.y_lo,
                                          in.y_hi, stride_in);
  const double band =
      std::max(6.0, 0.15 * std::min(o.width(), o.height()));
  detail::RegionMean outside;
  const auto add = [&](double x0, double x1, double y0, double y1) {
    const auto r = detail::region_mean(img, x0, x1, y0, y1, stride_in);
    outside.sum += r.sum;
    outside.count += r.count;
  };
  add(o.x_lo - band, o.x_hi + band, o.y_lo - band, o.y_lo - 1);
  add(o.x_lo - band, o.x_hi + band, o.y_hi + 1, o.y_hi + band);
  add(o.x_lo - band, o.x_lo - 1, o.y_lo, o.y_hi);
  add(o.x_hi + 1, o.x_hi + band, o.y_lo, o.y_hi);
  const double contrast =
      inside.count > 0
          ? (inside.mean() - outside.mean(inside.mean())) /
                std::max(inside.mean(), 1e-9)
          : 0.0;
  if (outside.count > 0 && contrast < margin)
    raise(ErrorCode::AmbiguousOrientation,
          "no usable contrast between module interior and background");

  // Corner hypotheses are built from the half-maximum crossings, which
  // track the geometric start and end of each edge's coverage ramp; the
  // vanish-point spans overshoot by roughly the smoothing radius.
  const double x1c = boxes.x_max.pos, x2c = boxes.x_min.pos;
  const double y1c = boxes.y_max.pos, y2c = boxes.y_min.pos;
  const double x1l = boxes.x_max.half_left, x1r = boxes.x_max.half_right;
  const double x2l = boxes.x_min.half_left, x2r = boxes.x_min.half_right;
  const double y1t = boxes.y_max.half_left, y1b = boxes.y_max.half_right;
  const double y2t = boxes.y_min.half_left, y2b = boxes.y_min.half_right;

  // Candidates as (top-left, top-right, bottom-right, bottom-left).
  struct Candidate {
    std::array<Point, 4> quad;
    double score = 0.0;
  };
  std::vector<Candidate> cands;
  // Axis-aligned: corners at the peak locations.
  cands.push_back({{Point{x1c, y1c}, {x2c, y1c}, {x2c, y2c}, {x1c, y2c}}, 0});
  // In-plane rotation, one diagonal leading.
  cands.push_back({{Point{x1r, y1t}, {x2r, y1b}, {x2l, y2b}, {x1l, y2t}}, 0});
  cands.push_back({{Point{x1l, y1b}, {x2l, y1t}, {x2r, y2t}, {x1r, y2b}}, 0});
  // Tilt about the vertical axis: one side taller.
  cands.push_back({{Point{x1c, y1b}, {x2c, y1t}, {x2c, y2b}, {x1c, y2t}}, 0});
  cands.push_back({{Point{x1c, y1t}, {x2c, y1b}, {x2c, y2t}, {x1c, y2b}}, 0});
  // Tilt about the horizontal axis: one edge wider.
  cands.push_back({{Point{x1l, y1c}, {x2r, y1c}, {x2l, y2c}, {x1r, y2c}}, 0});
  cands.push_back({{Point{x1r, y1c}, {x2l, y1c}, {x2r, y2c}, {x1l, y2c}}, 0});

  // Score over the ring between the boxes: how well the candidate separates
  // bright (module) from dark (background) samples there.
  const int stride_ring = std::max(
      1, static_cast<int>(std::max(o.width(), o.height())) / 384);
  const int xa = std::max(0, static_cast<int>(std::ceil(o.x_lo)));
  const int xb = std::min(img.width() - 1, static_cast<int>(std::floor(o.x_hi)));
  const int ya = std::max(0, static_cast<int>(std::ceil(o.y_lo)));
  const int yb = std::min(img.height() - 1, static_cast<int>(std::floor(o.y_hi)));
  struct Acc {
    double in_sum = 0;
    long in_n = 0;
    double out_sum = 0;
    long out_n = 0;
  };
  std::vector<Acc> accs(cands.size());
  for (int y = ya; y <= yb; y += stride_ring)
    for (int x = xa; x <= xb; x += stride_ring) {
      if (x >= in.x_lo && x <= in.x_hi && y >= in.y_lo && y <= in.y_hi)
        continue;
      const double v = img.at(x, y);
      for (size_t c = 0; c < cands.size(); ++c) {
        if (detail::in_convex_quad(cands[c].quad, x, y)) {
          accs[c].in_sum += v;
          ++accs[c].in_n;
        } else {
          accs[c].out_sum += v;
          ++accs[c].out_n;
        }
      }
    }
  double best = -1e300, second = -1e300, worst = 1e300;
  size_t best_idx = 0;
  for (size_t c = 0; c < cands.size(); ++c) {
    const double mi = accs[c].in_n > 0 ? accs[c].in_sum / accs[c].in_n : 0.0;
    const double mo = accs[c].out_n > 0 ? accs[c].out_sum / accs[c].out_n : mi;
    cands[c].score = mi - mo;
    if (cands[c].score > best) {
      second = best;
      best = cands[c].score;
      best_idx = c;
    } else if (cands[c].score > second) {
      second = cands[c].score;
    }
    worst = std::min(worst, cands[c].score);
  }

  std::array<Point, 4> quad = cands[best_idx].quad;
  if (!detail::convex_simple(quad) || detail::quad_area(quad) <= 0.0)
    quad = cands[0].quad;  // axis-aligned reading is always valid here

  ModuleDetection det;
  det.confidence.contrast = contrast;
  det.confidence.orientation_margin =
      best > worst ? (best - second) / (best - worst) : 0.0;

  // Long-side convention: (b1,b2) and (b3,b4) are the long sides; for a
  // square outline, top-left first, clockwise.
  const Point tl = quad[0], tr = quad[1], br = quad[2], bl = quad[3];
  const double horiz = distance(tl, tr) + distance(bl, br);
  const double vert = distance(tl, bl) + distance(tr, br);
  if (horiz >= vert)
    det.corners = {tl, tr, br, bl};
  else
    det.corners = {tl, bl, br, tr};
  return det;
}

/// Full module location from 1-D statistics: accumulate, differentiate,
/// threshold, pair the peaks per axis, build the bounding boxes, and
/// resolve the corners.
inline ModuleDetection detect_module(const GrayImage& img,
                                     const DetectorConfig& cfg = {}) {
  const double sigma =
      cfg.sigma_factor * std::max(img.width(), img.height());
  const int window = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));

  const Signal1D grad_x = smoothed_gradient(col_sum(img), sigma);
  const Signal1D grad_y = smoothed_gradient(row_sum(img), sigma);
  const auto ex_x = find_extrema(grad_x, cfg.module_threshold_k, window);
  const auto ex_y = find_extrema(grad_y, cfg.module_threshold_k, window);
  const AxisPair px = select_module(ex_x);
  const AxisPair py = select_module(ex_y);
  const BoundingBoxPair boxes = bounding_boxes(px, py);
  ModuleDetection det = disambiguate_corners(img, boxes, cfg.orientation_margin);

  const double thr_x =
      cfg.module_threshold_k * detail::stddev(grad_x.values);
  const double thr_y =
      cfg.module_threshold_k * detail::stddev(grad_y.values);
  det.confidence.peak_snr =
      std::min({std::abs(px.max_peak.value) / thr_x,
                std::abs(px.min_peak.value) / thr_x,
                std::abs(py.max_peak.value) / thr_y,
                std::abs(py.min_peak.value) / thr_y});
  return det;
}

}  // namespace elgrid
