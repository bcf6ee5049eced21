#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "elgrid/evaluation.hpp"

using namespace elgrid;

namespace {

Polygon square(double x0, double y0, double side) {
  return {{x0, y0}, {x0 + side, y0}, {x0 + side, y0 + side}, {x0, y0 + side}};
}

Polygon random_convex_quad(std::mt19937& rng) {
  std::uniform_real_distribution<double> radius(0.5, 2.0);
  std::uniform_real_distribution<double> jitter(0.0, M_PI / 4);
  Polygon quad;
  const double base = jitter(rng);
  for (int k = 0; k < 4; ++k) {
    const double a = base + k * M_PI / 2 + jitter(rng) * 0.5;
    const double r = radius(rng);
    quad.push_back({r * std::cos(a), r * std::sin(a)});
  }
  return polygon_convex(quad) ? quad : square(0, 0, 1);
}

}  // namespace

TEST_CASE("iou of identical squares is one") {
  const Polygon a = square(0, 0, 2);
  CHECK(polygon_iou(a, a) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("iou of half-offset unit squares") {
  const Polygon a = square(0, 0, 1);
  const Polygon b = square(0.5, 0, 1);
  CHECK(polygon_iou(a, b) == Catch::Approx(0.5 / 1.5).epsilon(1e-12));
}

TEST_CASE("iou of disjoint and nested polygons") {
  CHECK(polygon_iou(square(0, 0, 1), square(5, 5, 1)) == 0.0);
  // Nested: IoU equals the area ratio.
  CHECK(polygon_iou(square(0, 0, 4), square(1, 1, 2)) ==
        Catch::Approx(4.0 / 16.0).epsilon(1e-12));
}

TEST_CASE("iou is symmetric") {
  std::mt19937 rng(2);
  for (int t = 0; t < 50; ++t) {
    const Polygon a = random_convex_quad(rng);
    const Polygon b = random_convex_quad(rng);
    REQUIRE(polygon_iou(a, b) ==
            Catch::Approx(polygon_iou(b, a)).margin(1e-9));
  }
}

TEST_CASE("convex clipping matches the rasterization estimate") {
  std::mt19937 rng(3);
  for (int t = 0; t < 30; ++t) {
    const Polygon a = random_convex_quad(rng);
    const Polygon b = random_convex_quad(rng);
    const double exact = polygon_iou(a, b);
    const double raster_inter = detail::intersection_by_raster(a, b);
    const double uni = polygon_area(a) + polygon_area(b) - raster_inter;
    const double estimate = uni > 0 ? raster_inter / uni : 0.0;
    REQUIRE(exact == Catch::Approx(estimate).margin(0.005));
  }
}

TEST_CASE("concave polygons fall back to rasterization") {
  // A dart inside a containing square: IoU is the area ratio.
  const Polygon dart = {{0, 0}, {4, 1}, {8, 0}, {4, 6}};
  REQUIRE_FALSE(polygon_convex(dart));
  const Polygon box = square(-1, -1, 10);
  const double expected = polygon_area(dart) / polygon_area(box);
  CHECK(polygon_iou(dart, box) == Catch::Approx(expected).margin(0.005));
}

TEST_CASE("degenerate polygons are rejected") {
  CHECK_THROWS_AS(polygon_iou({{0, 0}, {1, 0}}, square(0, 0, 1)), Error);
  CHECK_THROWS_AS(polygon_iou({{0, 0}, {1, 0}, {2, 0}}, square(0, 0, 1)),
                  Error);
}

TEST_CASE("recall curve on trivial records") {
  std::vector<EvalRecord> all_perfect(5);
  for (auto& r : all_perfect) r.iou = 1.0;
  const RecallCurve curve = recall_curve(all_perfect);
  for (double rec : curve.recalls) CHECK(rec == 1.0);
  CHECK(curve.auc == Catch::Approx(0.5).epsilon(1e-12));

  std::vector<EvalRecord> mixed(3);
  mixed[0].iou = 1.0;
  mixed[1].iou = 0.6;
  mixed[2].iou = 0.0;
  CHECK(recall_at(mixed, 0.7) == Catch::Approx(1.0 / 3.0));
  CHECK(recall_at(mixed, 0.5) == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("recall curve is monotonically non-increasing") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<EvalRecord> records(40);
  for (auto& r : records) r.iou = dist(rng);
  const RecallCurve curve = recall_curve(records);
  for (size_t i = 0; i + 1 < curve.recalls.size(); ++i)
    REQUIRE(curve.recalls[i + 1] <= curve.recalls[i]);
  CHECK(curve.thresholds.front() == 0.5);
  CHECK(curve.thresholds.back() == 1.0);
  CHECK(curve.thresholds.size() == 101);
}

TEST_CASE("recall curve is bit-deterministic") {
  std::vector<EvalRecord> records(50);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (auto& r : records) r.iou = dist(rng);
  const RecallCurve a = recall_curve(records);
  const RecallCurve b = recall_curve(records);
  CHECK(a.auc == b.auc);
  CHECK(a.recalls == b.recalls);

  CHECK_THROWS_AS(recall_curve({}), Error);
}

TEST_CASE("miss records score zero iou") {
  EvalRecord r;
  r.truth = square(0, 0, 1);
  r.detected = std::nullopt;
  CHECK(record_iou(r) == 0.0);
  r.detected = Polygon(square(0.1, 0.1, 1));
  CHECK(record_iou(r) > 0.5);
}
