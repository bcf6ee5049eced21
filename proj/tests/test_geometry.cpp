#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "elgrid/geometry.hpp"

using namespace elgrid;

namespace {

Homography random_homography(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  while (true) {
    Homography h;
    for (auto& v : h.h) v = dist(rng);
    const Eigen::Matrix3d m = h.to_eigen();
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(m);
    const double cond =
        svd.singularValues()(0) / std::max(svd.singularValues()(2), 1e-300);
    if (std::abs(m.determinant()) > 0.05 && cond < 50.0) return h.normalized();
  }
}

std::vector<Point> generic_model_points() {
  return {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.2}, {0.8, 0.6},
          {0.23, 0.77}, {0.4, 0.95}};
}

double relative_h_error(const Homography& a, const Homography& b) {
  const auto an = a.normalized(), bn = b.normalized();
  double acc = 0.0;
  for (int i = 0; i < 9; ++i) acc += (an.h[i] - bn.h[i]) * (an.h[i] - bn.h[i]);
  return std::sqrt(acc);
}

}  // namespace

TEST_CASE("model grid layout") {
  const ModelGrid unit = model_grid(1, 1);
  REQUIRE(unit.point_count() == 4);
  CHECK(unit.at(0, 0).x == 0.0);
  CHECK(unit.at(1, 0).x == 1.0);
  CHECK(unit.at(0, 1).y == 1.0);
  CHECK(unit.at(1, 1).x == 1.0);
  CHECK(unit.at(1, 1).y == 1.0);

  const ModelGrid big = model_grid(10, 6);
  CHECK(big.point_count() == 77);
  CHECK(static_cast<int>(big.points.size()) == 77);
  CHECK(big.at(10, 6).x == 10.0);

  CHECK_THROWS_AS(model_grid(2, 3), Error);
  CHECK_THROWS_AS(model_grid(0, 0), Error);
}

TEST_CASE("projection basics") {
  const Homography id;
  const Point p = project(id, {3, 4});
  CHECK(p.x == 3.0);
  CHECK(p.y == 4.0);

  Homography scale;
  scale.h = {2, 0, 0, 0, 2, 0, 0, 0, 1};
  const Point q = project(scale, {1, 1});
  CHECK(q.x == 2.0);
  CHECK(q.y == 2.0);

  Homography to_infinity;
  to_infinity.h = {1, 0, 0, 0, 1, 0, 1, 0, -3};
  CHECK_THROWS_AS(project(to_infinity, {3.0, 1.0}), Error);
  CHECK_FALSE(try_project(to_infinity, {3.0, 1.0}).has_value());
}

TEST_CASE("projection round trip through the inverse") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    const Homography h = random_homography(rng);
    const Homography hi = h.inverse();
    const Point m{dist(rng), dist(rng)};
    const auto fwd = try_project(h, m);
    if (!fwd) continue;
    const auto back = try_project(hi, *fwd);
    REQUIRE(back.has_value());
    REQUIRE(back->x == Catch::Approx(m.x).margin(1e-9));
    REQUIRE(back->y == Catch::Approx(m.y).margin(1e-9));
  }
}

TEST_CASE("dlt recovers the identity from fixed points") {
  const std::vector<Correspondence> cs = {
      {{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{1, 1}, {1, 1}}, {{0, 1}, {0, 1}}};
  const Homography h = dlt(cs);
  Homography id;
  CHECK(relative_h_error(h, id.normalized()) < 1e-9);
  for (const auto& c : cs) {
    const Point p = project(h, c.model);
    CHECK(distance(p, c.image) < 1e-10);
  }
}

TEST_CASE("dlt recovers random homographies") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    const Homography truth = random_homography(rng);
    std::vector<Correspondence> cs;
    bool ok = true;
    for (const Point& m : generic_model_points()) {
      const auto p = try_project(truth, m);
      if (!p) {
        ok = false;
        break;
      }
      cs.push_back({m, *p});
    }
    if (!ok) continue;
    const Homography est = dlt(cs);
    REQUIRE(relative_h_error(est, truth) < 1e-8);
  }
}

TEST_CASE("dlt rejects collinear configurations") {
  const std::vector<Correspondence> cs = {
      {{0, 0}, {0, 0}}, {{1, 1}, {1, 0}}, {{2, 2}, {2, 0}}, {{3, 3}, {3, 1}}};
  CHECK_THROWS_AS(dlt(cs), Error);
  CHECK_THROWS_AS(dlt({{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{1, 1}, {1, 1}}}),
                  Error);
}

TEST_CASE("reprojection error normalization") {
  const Homography id;
  std::vector<Correspondence> perfect = {
      {{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{1, 1}, {1, 1}}, {{0, 1}, {0, 1}}};
  CHECK(reprojection_error(id, perfect, 1, 1) == 0.0);

  const std::vector<Correspondence> offset = {{{0.25, 0.5}, {3.25, 4.5}}};
  CHECK(reprojection_error(id, offset, 1, 1) == Catch::Approx(25.0));
  CHECK(reprojection_error(id, offset, 2, 3) == Catch::Approx(25.0 / 6.0));
}

TEST_CASE("reprojection error of exact epsilon displacements") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> angle(0.0, 2 * M_PI);
  const double eps = 0.37;
  const int n_cols = 10, m_rows = 6;
  const ModelGrid grid = model_grid(n_cols, m_rows);
  const Homography id;
  for (int t = 0; t < 1000; ++t) {
    std::vector<Correspondence> cs;
    for (const Point& m : grid.points) {
      const double a = angle(rng);
      cs.push_back({m, {m.x + eps * std::cos(a), m.y + eps * std::sin(a)}});
    }
    const double expected =
        eps * eps * static_cast<double>(cs.size()) / (n_cols * m_rows);
    REQUIRE(reprojection_error(id, cs, n_cols, m_rows) ==
            Catch::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("reprojection error ignores homogeneous scale") {
  std::mt19937_64 rng(10);
  const Homography h = random_homography(rng);
  Homography scaled = h;
  for (auto& v : scaled.h) v *= -7.3;
  std::vector<Correspondence> cs;
  for (const Point& m : generic_model_points())
    cs.push_back({m, {m.x + 0.1, m.y - 0.2}});
  CHECK(reprojection_error(h, cs, 2, 2) ==
        Catch::Approx(reprojection_error(scaled, cs, 2, 2)).epsilon(1e-12));
}

TEST_CASE("ransac on perfect correspondences") {
  std::mt19937_64 rng(12);
  const Homography truth = random_homography(rng);
  const ModelGrid grid = model_grid(10, 6);
  std::vector<Correspondence> cs;
  for (const Point& m : grid.points) {
    const auto p = try_project(truth, m);
    REQUIRE(p.has_value());
    cs.push_back({m, *p});
  }
  const double cell =
      distance(*try_project(truth, {5, 3}), *try_project(truth, {6, 4}));
  const RansacResult fit = ransac_refit(cs, 10, 6, cell);
  CHECK(fit.consensus_size == 77);
  for (bool flag : fit.inliers) CHECK(flag);
  CHECK(fit.error < 1e-12);
  CHECK(relative_h_error(fit.h, truth) < 1e-8);
}

TEST_CASE("ransac flags planted outliers and is seed-deterministic") {
  // Ground truth similar to a module filling a 1200x900 frame.
  Homography truth;
  truth.h = {90, 3, 120, -2, 88, 150, 1e-5, -2e-5, 1};
  truth = truth.normalized();
  const ModelGrid grid = model_grid(10, 6);
  std::vector<Correspondence> cs;
  for (const Point& m : grid.points) cs.push_back({m, project(truth, m)});
  const double cell = distance(project(truth, {5, 3}), project(truth, {6, 4}));

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ux(0.0, 1200.0), uy(0.0, 900.0);
  std::vector<int> planted;
  while (planted.size() < 23) {  // 30% of 77
    const int idx = static_cast<int>(rng() % cs.size());
    if (std::find(planted.begin(), planted.end(), idx) == planted.end()) {
      planted.push_back(idx);
      cs[idx].image = {ux(rng), uy(rng)};
    }
  }

  RansacConfig rc;
  rc.seed = 5;
  const RansacResult fit = ransac_refit(cs, 10, 6, cell, rc);
  for (int idx : planted) CHECK_FALSE(fit.inliers[idx]);
  for (size_t k = 0; k < cs.size(); ++k) {
    if (std::find(planted.begin(), planted.end(), static_cast<int>(k)) !=
        planted.end())
      continue;
    CHECK(fit.inliers[k]);
    const Point p = project(fit.h, cs[k].model);
    CHECK(distance(p, cs[k].image) < 0.005 * cell);
  }

  const RansacResult again = ransac_refit(cs, 10, 6, cell, rc);
  CHECK(again.inliers == fit.inliers);
  CHECK(again.h.h == fit.h.h);
  CHECK(again.error == fit.error);
}

TEST_CASE("ransac inlier flags satisfy the threshold under the returned H") {
  Homography truth;
  truth.h = {50, 0, 40, 0, 50, 30, 0, 0, 1};
  const ModelGrid grid = model_grid(6, 4);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> jitter(0.0, 1.5);
  std::vector<Correspondence> cs;
  for (const Point& m : grid.points) {
    Point p = project(truth, m);
    p.x += jitter(rng);
    p.y += jitter(rng);
    cs.push_back({m, p});
  }
  const double cell = distance(project(truth, {3, 2}), project(truth, {4, 3}));
  RansacConfig rc;
  rc.seed = 17;
  const RansacResult fit = ransac_refit(cs, 6, 4, cell, rc);
  const double threshold = rc.inlier_cell_fraction * cell;
  for (size_t k = 0; k < cs.size(); ++k) {
    const double d = distance(project(fit.h, cs[k].model), cs[k].image);
    if (fit.inliers[k])
      CHECK(d <= threshold);
    else
      CHECK(d > threshold);
  }
}

TEST_CASE("ransac fails on insufficient consensus") {
  std::vector<Correspondence> cs = {{{0, 0}, {0, 0}},
                                    {{1, 0}, {100, 0}},
                                    {{1, 1}, {-50, 77}},
                                    {{0, 1}, {3, -900}},
                                    {{0.5, 0.5}, {0.5, 0.4}}};
  CHECK_THROWS_AS(ransac_refit(cs, 1, 1, 10.0), Error);
  CHECK_THROWS_AS(ransac_refit({cs[0], cs[1], cs[2]}, 1, 1, 10.0), Error);
}

TEST_CASE("homography normalization is canonical") {
  std::mt19937_64 rng(33);
  const Homography h = random_homography(rng);
  Homography flipped = h;
  for (auto& v : flipped.h) v *= -3.7;
  const auto a = h.normalized(), b = flipped.normalized();
  for (int i = 0; i < 9; ++i)
    REQUIRE(a.h[i] == Catch::Approx(b.h[i]).margin(1e-15));
  double norm = 0.0;
  for (double v : a.h) norm += v * v;
  CHECK(norm == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(a.h[8] >= 0.0);
}
