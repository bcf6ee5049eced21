#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "elgrid/module_detection.hpp"
#include "elgrid/synthetic.hpp"

using namespace elgrid;

namespace {

Signal1D make_signal(std::vector<double> values, int src_w = 0, int src_h = 0) {
  Signal1D s;
  s.values = std::move(values);
  s.source_width = src_w > 0 ? src_w : s.size();
  s.source_height = src_h > 0 ? src_h : 1;
  return s;
}

Extremum make_extremum(int index, ExtremumKind kind, double value, int left,
                       int right) {
  Extremum e;
  e.index = index;
  e.kind = kind;
  e.value = value;
  e.span_left = left;
  e.span_right = right;
  e.pos = index;
  e.half_left = left;
  e.half_right = right;
  return e;
}

double corner_error(const std::array<Point, 4>& detected,
                    const std::array<Point, 4>& truth) {
  double worst = 0.0;
  for (const auto& d : detected) {
    double best = 1e300;
    for (const auto& t : truth) best = std::min(best, distance(d, t));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

TEST_CASE("find_extrema on a flat gradient") {
  const Signal1D zero = make_signal(std::vector<double>(64, 0.0));
  CHECK(find_extrema(zero, 2.0, 3).empty());
}

TEST_CASE("find_extrema on a step-up step-down signal") {
  // Plateau signal; its smoothed gradient has one maximum then one minimum.
  std::vector<double> sig(120, 0.1);
  for (int i = 40; i < 80; ++i) sig[i] = 1.0;
  const Signal1D grad = smoothed_gradient(make_signal(sig), 2.0);
  const auto extrema = find_extrema(grad, 2.0, 6);

  REQUIRE(extrema.size() == 2);
  CHECK(extrema[0].kind == ExtremumKind::Maximum);
  CHECK(extrema[1].kind == ExtremumKind::Minimum);
  CHECK(extrema[0].value > 0.0);
  CHECK(extrema[1].value < 0.0);

  // Exhaustive-scan oracle: global extrema of the gradient.
  int argmax = 0, argmin = 0;
  for (int i = 1; i < grad.size(); ++i) {
    if (grad[i] > grad[argmax]) argmax = i;
    if (grad[i] < grad[argmin]) argmin = i;
  }
  CHECK(extrema[0].index == argmax);
  CHECK(extrema[1].index == argmin);
  CHECK(std::abs(argmax - 40) <= 1);
  CHECK(std::abs(argmin - 80) <= 1);
}

TEST_CASE("find_extrema sees two modules as max min max min") {
  SceneSpec spec;
  spec.width = 900;
  spec.height = 400;
  spec.fill = 0.30;
  spec.offset_x = -220.0;
  spec.neighbor_offsets.push_back({12.0, 0.0});  // second full module right
  spec.noise_sigma = 0.005;
  const RenderedScene scene = render(spec, 3);

  const double sigma = 0.01 * std::max(spec.width, spec.height);
  const Signal1D grad_x = smoothed_gradient(col_sum(scene.image), sigma);
  const auto extrema =
      find_extrema(grad_x, 2.0, static_cast<int>(std::ceil(3 * sigma)));
  REQUIRE(extrema.size() == 4);
  CHECK(extrema[0].kind == ExtremumKind::Maximum);
  CHECK(extrema[1].kind == ExtremumKind::Minimum);
  CHECK(extrema[2].kind == ExtremumKind::Maximum);
  CHECK(extrema[3].kind == ExtremumKind::Minimum);
}

TEST_CASE("peak_span on a triangular peak") {
  std::vector<double> grad(100, 0.0);
  for (int i = 40; i <= 50; ++i) grad[i] = (i - 40) / 10.0;
  for (int i = 50; i <= 60; ++i) grad[i] = (60 - i) / 10.0;
  const auto [left, right] =
      peak_span(make_signal(grad), 50, ExtremumKind::Maximum);
  CHECK(left == 41);
  CHECK(right == 59);
}

TEST_CASE("peak_span clamps at the signal ends") {
  std::vector<double> grad = {1.0, 0.8, 0.6, 0.4, 0.2, 0.05, 0.0, 0.0};
  const auto [left, right] =
      peak_span(make_signal(grad), 0, ExtremumKind::Maximum);
  CHECK(left == 0);
  CHECK(right == 5);

  std::vector<double> never(32, 0.0);
  for (int i = 0; i < 32; ++i) never[i] = 1.0;  // never vanishes
  const auto [l2, r2] = peak_span(make_signal(never), 16, ExtremumKind::Maximum);
  CHECK(l2 == 0);
  CHECK(r2 == 31);
}

TEST_CASE("peak span widens monotonically with tilt") {
  // Tilt about the vertical axis slants the top/bottom edges, smearing the
  // row-sum gradient peaks.
  double prev_width = -1.0;
  for (double tilt : {0.0, 20.0, 40.0}) {
    SceneSpec spec;
    spec.tilt_deg = tilt;
    const RenderedScene scene = render(spec, 4);
    const double sigma = 0.01 * std::max(spec.width, spec.height);
    const Signal1D grad_y = smoothed_gradient(row_sum(scene.image), sigma);
    const auto extrema =
        find_extrema(grad_y, 2.0, static_cast<int>(std::ceil(3 * sigma)));
    const AxisPair pair = select_module(extrema);
    const double width =
        pair.max_peak.span_right - pair.max_peak.span_left;
    CHECK(width > prev_width);
    prev_width = width;
  }
}

TEST_CASE("select_module trivial pairs") {
  const auto mx = [](int i, double v) {
    return make_extremum(i, ExtremumKind::Maximum, v, i - 1, i + 1);
  };
  const auto mn = [](int i, double v) {
    return make_extremum(i, ExtremumKind::Minimum, v, i - 1, i + 1);
  };

  const AxisPair single = select_module({mx(10, 1.0), mn(90, -1.0)});
  CHECK(single.max_peak.index == 10);
  CHECK(single.min_peak.index == 90);

  const AxisPair collapsed =
      select_module({mx(10, 0.5), mx(12, 0.9), mn(90, -1.0)});
  CHECK(collapsed.max_peak.index == 12);
  CHECK(collapsed.min_peak.index == 90);

  const AxisPair farthest = select_module(
      {mx(5, 1.0), mn(20, -1.0), mx(30, 0.8), mn(95, -0.9)});
  CHECK(farthest.max_peak.index == 30);
  CHECK(farthest.min_peak.index == 95);

  CHECK_THROWS_AS(select_module({mn(20, -1.0), mx(30, 1.0)}), Error);
  CHECK_THROWS_AS(select_module({}), Error);
}

TEST_CASE("bounding_boxes assembles the span endpoints") {
  const AxisPair x{make_extremum(100, ExtremumKind::Maximum, 1.0, 95, 105),
                   make_extremum(300, ExtremumKind::Minimum, -1.0, 295, 305)};
  const AxisPair y{make_extremum(50, ExtremumKind::Maximum, 1.0, 45, 55),
                   make_extremum(200, ExtremumKind::Minimum, -1.0, 195, 205)};
  const BoundingBoxPair boxes = bounding_boxes(x, y);
  CHECK(boxes.outer.x_lo == 95.0);
  CHECK(boxes.outer.x_hi == 305.0);
  CHECK(boxes.outer.y_lo == 45.0);
  CHECK(boxes.outer.y_hi == 205.0);
  CHECK(boxes.inner.x_lo == 105.0);
  CHECK(boxes.inner.x_hi == 295.0);
  CHECK(boxes.inner.y_lo == 55.0);
  CHECK(boxes.inner.y_hi == 195.0);

  // Bottom-left, bottom-right, top-right, top-left.
  const auto outer = boxes.outer.corners();
  CHECK(outer[0].x == 95.0);
  CHECK(outer[0].y == 205.0);
  CHECK(outer[2].x == 305.0);
  CHECK(outer[2].y == 45.0);
}

TEST_CASE("bounding_boxes with collapsed spans coincide") {
  const AxisPair x{make_extremum(100, ExtremumKind::Maximum, 1.0, 100, 100),
                   make_extremum(300, ExtremumKind::Minimum, -1.0, 300, 300)};
  const AxisPair y{make_extremum(50, ExtremumKind::Maximum, 1.0, 50, 50),
                   make_extremum(200, ExtremumKind::Minimum, -1.0, 200, 200)};
  const BoundingBoxPair boxes = bounding_boxes(x, y);
  CHECK(boxes.outer.x_lo == boxes.inner.x_lo);
  CHECK(boxes.outer.x_hi == boxes.inner.x_hi);
  CHECK(boxes.outer.y_lo == boxes.inner.y_lo);
  CHECK(boxes.outer.y_hi == boxes.inner.y_hi);
}

TEST_CASE("bounding_boxes rejects crossed spans") {
  const AxisPair x{make_extremum(100, ExtremumKind::Maximum, 1.0, 95, 200),
                   make_extremum(210, ExtremumKind::Minimum, -1.0, 150, 215)};
  const AxisPair y{make_extremum(50, ExtremumKind::Maximum, 1.0, 45, 55),
                   make_extremum(200, ExtremumKind::Minimum, -1.0, 195, 205)};
  CHECK_THROWS_AS(bounding_boxes(x, y), Error);
}

TEST_CASE("rotated module separates the boxes strictly") {
  SceneSpec spec;
  spec.rotation_deg = 30.0;
  spec.fill = 0.5;
  const RenderedScene scene = render(spec, 5);
  // A rotation this strong smears the peaks below the 2-sigma gate; the
  // box geometry itself is probed with a permissive threshold.
  const double sigma = 0.01 * std::max(spec.width, spec.height);
  const int w = static_cast<int>(std::ceil(3 * sigma));
  const AxisPair px = select_module(
      find_extrema(smoothed_gradient(col_sum(scene.image), sigma), 1.0, w));
  const AxisPair py = select_module(
      find_extrema(smoothed_gradient(row_sum(scene.image), sigma), 1.0, w));
  const BoundingBoxPair boxes = bounding_boxes(px, py);
  CHECK(boxes.outer.x_lo < boxes.inner.x_lo);
  CHECK(boxes.outer.x_hi > boxes.inner.x_hi);
  CHECK(boxes.outer.y_lo < boxes.inner.y_lo);
  CHECK(boxes.outer.y_hi > boxes.inner.y_hi);
}

TEST_CASE("disambiguate_corners raises on a contrast-free image") {
  const GrayImage white(240, 180, 1.0);
  const AxisPair x{make_extremum(40, ExtremumKind::Maximum, 1.0, 30, 50),
                   make_extremum(200, ExtremumKind::Minimum, -1.0, 190, 210)};
  const AxisPair y{make_extremum(40, ExtremumKind::Maximum, 1.0, 30, 50),
                   make_extremum(140, ExtremumKind::Minimum, -1.0, 130, 150)};
  const BoundingBoxPair boxes = bounding_boxes(x, y);
  CHECK_THROWS_MATCHES(
      disambiguate_corners(white, boxes), Error,
      Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.code() == ErrorCode::AmbiguousOrientation;
      }));
}

TEST_CASE("detect_module on a frontal scene") {
  SceneSpec spec;
  spec.noise_sigma = 0.02;
  const RenderedScene scene = render(spec, 6);
  const ModuleDetection det = detect_module(scene.image);
  const double diag = distance(scene.corners[0], scene.corners[2]);
  CHECK(corner_error(det.corners, scene.corners) < 0.02 * diag);
}

TEST_CASE("detect_module on an in-plane sheared scene matches truth") {
  SceneSpec spec;
  spec.rotation_deg = 14.0;
  spec.fill = 0.55;
  spec.noise_sigma = 0.01;
  const RenderedScene scene = render(spec, 7);
  const ModuleDetection det = detect_module(scene.image);
  // Span resolution: smoothing radius of the 1-D statistics.
  const double sigma = 0.01 * std::max(spec.width, spec.height);
  CHECK(corner_error(det.corners, scene.corners) < 1.5 * sigma);
}

TEST_CASE("detect_module picks the fully visible module") {
  SceneSpec spec;
  spec.fill = 0.5;
  spec.offset_x = -120.0;
  spec.noise_sigma = 0.01;
  spec.neighbor_offsets.push_back({11.0, 0.0});  // neighbor hangs off-frame
  const RenderedScene scene = render(spec, 8);
  const ModuleDetection det = detect_module(scene.image);
  const double diag = distance(scene.corners[0], scene.corners[2]);
  CHECK(corner_error(det.corners, scene.corners) < 0.03 * diag);
}

TEST_CASE("detect_module on noise raises a typed error") {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (uint32_t seed : {1u, 2u, 3u, 4u, 5u}) {
    GrayImage noise(320, 240);
    rng.seed(seed);
    for (auto& v : noise.data()) v = dist(rng);
    try {
      const ModuleDetection det = detect_module(noise);
      // A detection on pure noise must not carry usable confidence.
      CHECK(det.confidence.contrast < 0.3);
    } catch (const Error& e) {
      const bool typed = e.code() == ErrorCode::NoModuleFound ||
                         e.code() == ErrorCode::AmbiguousOrientation ||
                         e.code() == ErrorCode::DegenerateBox;
      CHECK(typed);
    }
  }
}

TEST_CASE("detection is equivariant to translation") {
  SceneSpec base;
  base.fill = 0.5;
  base.noise_sigma = 0.0;
  const RenderedScene a = render(base, 9);
  SceneSpec moved = base;
  moved.offset_x = 17.0;
  moved.offset_y = -12.0;
  const RenderedScene b = render(moved, 9);

  const ModuleDetection da = detect_module(a.image);
  const ModuleDetection db = detect_module(b.image);
  for (int k = 0; k < 4; ++k) {
    CHECK(db.corners[k].x - da.corners[k].x == Catch::Approx(17.0).margin(1.5));
    CHECK(db.corners[k].y - da.corners[k].y == Catch::Approx(-12.0).margin(1.5));
  }
}

TEST_CASE("detection is invariant to intensity scaling") {
  SceneSpec spec;
  spec.noise_sigma = 0.01;
  const RenderedScene scene = render(spec, 10);
  GrayImage dimmed(scene.image.width(), scene.image.height());
  for (int y = 0; y < dimmed.height(); ++y)
    for (int x = 0; x < dimmed.width(); ++x)
      dimmed.at(x, y) = 0.55 * scene.image.at(x, y);

  const ModuleDetection bright = detect_module(scene.image);
  const ModuleDetection dim = detect_module(dimmed);
  for (int k = 0; k < 4; ++k) {
    CHECK(dim.corners[k].x == Catch::Approx(bright.corners[k].x).margin(1e-6));
    CHECK(dim.corners[k].y == Catch::Approx(bright.corners[k].y).margin(1e-6));
  }
}

TEST_CASE("post-suppression extrema alternate or are gap-separated") {
  std::mt19937 rng(123);
  std::normal_distribution<double> noise(0.0, 0.2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> sig(256, 0.2);
    // Random piecewise-constant structure plus noise.
    int pos = 0;
    std::uniform_int_distribution<int> step(20, 60);
    std::uniform_real_distribution<double> level(0.0, 1.0);
    while (pos < 256) {
      const int end = std::min(256, pos + step(rng));
      const double v = level(rng);
      for (int i = pos; i < end; ++i) sig[i] = v;
      pos = end;
    }
    for (auto& v : sig) v += noise(rng);

    const Signal1D grad = smoothed_gradient(make_signal(sig), 2.0);
    const double k = 2.0;
    const auto extrema = find_extrema(grad, k, 6);
    const double sigma_k = [&] {
      double mean = 0, acc = 0;
      for (double v : grad.values) mean += v;
      mean /= grad.size();
      for (double v : grad.values) acc += (v - mean) * (v - mean);
      return std::sqrt(acc / grad.size());
    }();
    const double threshold = k * sigma_k;

    for (size_t t = 0; t + 1 < extrema.size(); ++t) {
      if (extrema[t].kind != extrema[t + 1].kind) continue;
      const double s =
          extrema[t].kind == ExtremumKind::Maximum ? 1.0 : -1.0;
      bool gap = false;
      for (int i = extrema[t].index + 1; i < extrema[t + 1].index; ++i)
        if (s * grad[i] < threshold) {
          gap = true;
          break;
        }
      REQUIRE(gap);
    }
  }
}

TEST_CASE("inner box is contained in the outer box across poses") {
  for (double rot : {0.0, 8.0, 20.0}) {
    for (double tilt : {0.0, 25.0, 50.0}) {
      SceneSpec spec;
      spec.rotation_deg = rot;
      spec.tilt_deg = tilt;
      spec.fill = 0.5;
      const RenderedScene scene = render(spec, 11);
      const double sigma = 0.01 * std::max(spec.width, spec.height);
      const int w = static_cast<int>(std::ceil(3 * sigma));
      const AxisPair px = select_module(find_extrema(
          smoothed_gradient(col_sum(scene.image), sigma), 1.0, w));
      const AxisPair py = select_module(find_extrema(
          smoothed_gradient(row_sum(scene.image), sigma), 1.0, w));
      const BoundingBoxPair boxes = bounding_boxes(px, py);
      CHECK(boxes.inner.x_lo >= boxes.outer.x_lo);
      CHECK(boxes.inner.x_hi <= boxes.outer.x_hi);
      CHECK(boxes.inner.y_lo >= boxes.outer.y_lo);
      CHECK(boxes.inner.y_hi <= boxes.outer.y_hi);
    }
  }
}

TEST_CASE("long side convention holds on oracle scenes") {
  for (double rot : {0.0, 10.0, 14.0}) {
    SceneSpec spec;
    spec.rotation_deg = rot;
    spec.fill = 0.5;
    const RenderedScene scene = render(spec, 12);
    const ModuleDetection det = detect_module(scene.image);
    const double long_side = distance(det.corners[0], det.corners[1]);
    const double short_side = distance(det.corners[1], det.corners[2]);
    CHECK(long_side >= short_side);
  }
}
