#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "elgrid/error.hpp"
#include "elgrid/image.hpp"

namespace elgrid {

/// 3x3 projective map, stored row-major. Defined up to scale; normalized()
/// fixes the representative with unit Frobenius norm and a non-negative
/// bottom-right element so serialized matrices compare bit-exactly.
struct Homography {
  std::array<double, 9> h{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double operator()(int r, int c) const { return h[3 * r + c]; }
  double& operator()(int r, int c) { return h[3 * r + c]; }

  static Homography from_eigen(const Eigen::Matrix3d& m) {
    Homography out;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out(r, c) = m(r, c);
    return out;
  }

  Eigen::Matrix3d to_eigen() const {
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = (*this)(r, c);
    return m;
  }

  Homography normalized() const {
    double norm = 0.0;
    for (double v : h) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0)
      raise(ErrorCode::DegenerateConfiguration, "zero homography");
    double sign = 1.0;
    if (h[8] < 0.0) {
      sign = -1.0;
    } else if (h[8] == 0.0) {
      for (double v : h)
        if (v != 0.0) {
          sign = v > 0.0 ? 1.0 : -1.0;
          break;
        }
    }
    Homography out;
    for (int i = 0; i < 9; ++i) out.h[i] = h[i] * sign / norm;
    return out;
  }

  Homography inverse() const {
    const Eigen::Matrix3d m = to_eigen();
    if (std::abs(m.determinant()) < 1e-14)
      raise(ErrorCode::DegenerateConfiguration, "homography not invertible");
    return from_eigen(m.inverse().eval()).normalized();
  }
};

/// Regular lattice of cell crossing points for an N x M cell module, unit
/// cell size, origin at the upper-left corner, y pointing down. Points are
/// indexed i in [0,N], j in [0,M] and stored j-major.
struct ModelGrid {
  int cols = 0;  // N, cells along the long side
  int rows = 0;  // M
  std::vector<Point> points;

  int point_count() const { return (cols + 1) * (rows + 1); }
  int index(int i, int j) const { return j * (cols + 1) + i; }
  const Point& at(int i, int j) const { return points[index(i, j)]; }
};

inline ModelGrid model_grid(int n_cols, int m_rows) {
  if (m_rows < 1 || n_cols < m_rows)
    raise(ErrorCode::InvalidArgument,
          "require N >= M >= 1, got N=" + std::to_string(n_cols) +
              " M=" + std::to_string(m_rows));
  ModelGrid g;
  g.cols = n_cols;
  g.rows = m_rows;
  g.points.reserve(g.point_count());
  for (int j = 0; j <= m_rows; ++j)
    for (int i = 0; i <= n_cols; ++i)
      g.points.push_back({static_cast<double>(i), static_cast<double>(j)});
  return g;
}

/// Applies H to a point in homogeneous form and converts back to cartesian.
/// Throws PointAtInfinity when the result's third coordinate vanishes
/// relative to the homogeneous vector norm.
inline Point project(const Homography& H, const Point& m) {
  const double x = H(0, 0) * m.x + H(0, 1) * m.y + H(0, 2);
  const double y = H(1, 0) * m.x + H(1, 1) * m.y + H(1, 2);
  const double w = H(2, 0) * m.x + H(2, 1) * m.y + H(2, 2);
  const double norm = std::sqrt(x * x + y * y + w * w);
  if (std::abs(w) < 1e-12 * norm || norm == 0.0)
    raise(ErrorCode::PointAtInfinity, "projected point at infinity");
  return {x / w, y / w};
}

/// Non-throwing variant used by consensus scoring: maps points at infinity
/// to an infinite distance instead of raising.
inline std::optional<Point> try_project(const Homography& H, const Point& m) {
  const double x = H(0, 0) * m.x + H(0, 1) * m.y + H(0, 2);
  const double y = H(1, 0) * m.x + H(1, 1) * m.y + H(1, 2);
  const double w = H(2, 0) * m.x + H(2, 1) * m.y + H(2, 2);
  const double norm = std::sqrt(x * x + y * y + w * w);
  if (std::abs(w) < 1e-12 * norm || norm == 0.0) return std::nullopt;
  return Point{x / w, y / w};
}

struct Correspondence {
  Point model;
  Point image;
  bool inlier = false;
};

namespace detail {

// Isotropic normalization: centroid to origin, mean distance sqrt(2).
struct NormTransform {
  double scale = 1.0;
  Point shift;
};

inline NormTransform normalizing_transform(const std::vector<Point>& pts) {
  NormTransform t;
  double cx = 0, cy = 0;
  for (const auto& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= pts.size();
  cy /= pts.size();
  double mean_dist = 0;
  for (const auto& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
  mean_dist /= pts.size();
  if (mean_dist < 1e-12)
    raise(ErrorCode::DegenerateConfiguration, "coincident points");
  t.scale = std::sqrt(2.0) / mean_dist;
  t.shift = {cx, cy};
  return t;
}

inline Eigen::Matrix3d to_matrix(const NormTransform& t) {
  Eigen::Matrix3d m;
  m << t.scale, 0, -t.scale * t.shift.x, 0, t.scale, -t.scale * t.shift.y, 0,
      0, 1;
  return m;
}

}  // namespace detail

/// Direct linear transform from >= 4 correspondences, with isotropic point
/// normalization on both sides for conditioning. Exact (up to scale) when
/// the input is consistent with a true homography.
inline Homography dlt(const std::vector<Correspondence>& cs) {
  const int n = static_cast<int>(cs.size());
  if (n < 4)
    raise(ErrorCode::DegenerateConfiguration,
          "DLT needs at least 4 correspondences, got " + std::to_string(n));

  std::vector<Point> mp(n), ip(n);
  for (int k = 0; k < n; ++k) {
    mp[k] = cs[k].model;
    ip[k] = cs[k].image;
  }
  const auto tm = detail::normalizing_transform(mp);
  const auto ti = detail::normalizing_transform(ip);

  Eigen::MatrixXd a(2 * n, 9);
  for (int k = 0; k < n; ++k) {
    const double mx = tm.scale * (mp[k].x - tm.shift.x);
    const double my = tm.scale * (mp[k].y - tm.shift.y);
    const double ix = ti.scale * (ip[k].x - ti.shift.x);
    const double iy = ti.scale * (ip[k].y - ti.shift.y);
    a.row(2 * k) << -mx, -my, -1, 0, 0, 0, ix * mx, ix * my, ix;
    a.row(2 * k + 1) << 0, 0, 0, -mx, -my, -1, iy * mx, iy * my, iy;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  // Rank must be 8 for a unique solution; a collinear or repeated sample
  // drops it further and leaves the null space multi-dimensional.
  if (sigma(7) < 1e-9 * sigma(0))
    raise(ErrorCode::DegenerateConfiguration,
          "rank-deficient correspondence configuration");

  Eigen::Matrix3d hn;
  const auto v = svd.matrixV().col(8);
  hn << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);

  const Eigen::Matrix3d h =
      detail::to_matrix(ti).inverse() * hn * detail::to_matrix(tm);
  const Homography out = Homography::from_eigen(h).normalized();
  if (std::abs(out.to_eigen().determinant()) < 1e-12)
    raise(ErrorCode::DegenerateConfiguration, "estimated homography singular");
  return out;
}

/// Mean squared reprojection distance over the supplied correspondences,
/// normalized by the cell count N*M (not the point count).
inline double reprojection_error(const Homography& H,
                                 const std::vector<Correspondence>& cs,
                                 int n_cols, int m_rows) {
  if (cs.empty())
    raise(ErrorCode::InvalidArgument, "no correspondences");
  double acc = 0.0;
  for (const auto& c : cs) {
    const Point p = project(H, c.model);
    const double dx = p.x - c.image.x, dy = p.y - c.image.y;
    acc += dx * dx + dy * dy;
  }
  return acc / (static_cast<double>(n_cols) * m_rows);
}

struct RansacConfig {
  int iterations = 2000;
  double min_inlier_fraction = 0.25;
  double inlier_cell_fraction = 0.05;
  double early_exit_fraction = 0.9;
  uint64_t seed = 0;
};

struct RansacResult {
  Homography h;
  std::vector<bool> inliers;
  double error = 0.0;  // over inliers, cell-count normalized
  int consensus_size = 0;
  int iterations_run = 0;
};

namespace detail {

inline bool collinear_triple_present(const std::array<Point, 4>& p) {
  for (int a = 0; a < 2; ++a)
    for (int b = a + 1; b < 3; ++b)
      for (int c = b + 1; c < 4; ++c) {
        const double area = (p[b].x - p[a].x) * (p[c].y - p[a].y) -
                            (p[b].y - p[a].y) * (p[c].x - p[a].x);
        if (std::abs(area) < 1e-9) return true;
      }
  return false;
}

}  // namespace detail

/// RANSAC over point correspondences: repeated minimal 4-point DLT fits,
/// consensus measured against a threshold of inlier_cell_fraction times the
/// approximate cell size in pixels. The best consensus set is refit with a
/// full DLT; inlier flags are re-evaluated under that final estimate so
/// every reported inlier satisfies the threshold under the returned H.
inline RansacResult ransac_refit(const std::vector<Correspondence>& cs,
                                 int n_cols, int m_rows, double cell_px,
                                 const RansacConfig& cfg = {}) {
  const int n = static_cast<int>(cs.size());
  if (n < 4)
    raise(ErrorCode::InsufficientConsensus,
          "need at least 4 correspondences, got " + std::to_string(n));
  if (cell_px <= 0.0)
    raise(ErrorCode::InvalidArgument, "cell size must be positive");

  const double threshold = cfg.inlier_cell_fraction * cell_px;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);

  std::vector<int> best;
  int iterations_run = 0;
  for (int t = 0; t < cfg.iterations; ++t) {
    ++iterations_run;
    std::array<int, 4> idx{};
    for (int k = 0; k < 4;) {
      const int candidate = pick(rng);
      bool dup = false;
      for (int j = 0; j < k; ++j) dup |= idx[j] == candidate;
      if (!dup) idx[k++] = candidate;
    }
    const std::array<Point, 4> sample_model{cs[idx[0]].model, cs[idx[1]].model,
                                            cs[idx[2]].model, cs[idx[3]].model};
    if (detail::collinear_triple_present(sample_model)) continue;

    Homography ht;
    try {
      ht = dlt({cs[idx[0]], cs[idx[1]], cs[idx[2]], cs[idx[3]]});
    } catch (const Error&) {
      continue;
    }

    std::vector<int> consensus;
    consensus.reserve(n);
    for (int k = 0; k < n; ++k) {
      const auto p = try_project(ht, cs[k].model);
      if (p && distance(*p, cs[k].image) <= threshold) consensus.push_back(k);
    }
    if (consensus.size() > best.size()) {
      best = std::move(consensus);
      if (static_cast<double>(best.size()) >= cfg.early_exit_fraction * n)
        break;
    }
  }

  // A minimal sample always fits itself exactly, so for n > 4 a consensus
  // of 4 carries no evidence; at least one extra point must agree.
  const int required =
      std::max(n > 4 ? 5 : 4,
               static_cast<int>(std::ceil(cfg.min_inlier_fraction * n)));
  if (static_cast<int>(best.size()) < required)
    raise(ErrorCode::InsufficientConsensus,
          "best consensus has " + std::to_string(best.size()) + " of " +
              std::to_string(n) + " correspondences");

  std::vector<Correspondence> consensus_cs;
  consensus_cs.reserve(best.size());
  for (int k : best) consensus_cs.push_back(cs[k]);
  RansacResult out;
  out.h = dlt(consensus_cs);
  out.consensus_size = static_cast<int>(best.size());
  out.iterations_run = iterations_run;

  out.inliers.assign(n, false);
  std::vector<Correspondence> final_inliers;
  for (int k = 0; k < n; ++k) {
    const auto p = try_project(out.h, cs[k].model);
    if (p && distance(*p, cs[k].image) <= threshold) {
      out.inliers[k] = true;
      final_inliers.push_back(cs[k]);
    }
  }
  out.error = final_inliers.empty()
                  ? std::numeric_limits<double>::infinity()
                  : reprojection_error(out.h, final_inliers, n_cols, m_rows);
  return out;
}

}  // namespace elgrid
