#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "elgrid/error.hpp"

namespace elgrid {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Single-channel image with intensities in [0,1].
///
/// Storage is row-major, zero-based: at(x, y) addresses column x in [0,w)
/// and row y in [0,h), x growing rightward and y downward. Continuous
/// coordinates place the center of pixel (x, y) at exactly (x, y); this is
/// the convention pinned by the sampling tests.
class GrayImage {
public:
  GrayImage(int width, int height, double fill = 0.0)
      : width_(width), height_(height) {
    if (width < 2 || height < 2)
      raise(ErrorCode::InvalidArgument,
            "image must be at least 2x2, got " + std::to_string(width) + "x" +
                std::to_string(height));
    data_.assign(static_cast<size_t>(width) * height, fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  double at(int x, int y) const { return data_[idx(x, y)]; }
  double& at(int x, int y) { return data_[idx(x, y)]; }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

private:
  size_t idx(int x, int y) const {
    return static_cast<size_t>(y) * width_ + x;
  }

  int width_;
  int height_;
  std::vector<double> data_;
};

/// Axis a 1-D accumulation ran over. X means the signal is indexed by the
/// image x coordinate (one value per column), Y by the y coordinate.
enum class Axis { X, Y };

struct Signal1D {
  std::vector<double> values;
  Axis axis = Axis::X;
  int source_width = 0;
  int source_height = 0;

  int size() const noexcept { return static_cast<int>(values.size()); }
  double operator[](int i) const { return values[i]; }
};

/// Sums each image row; element y is the total intensity of row y.
/// Output length equals the image height.
inline Signal1D row_sum(const GrayImage& img) {
  Signal1D out;
  out.axis = Axis::Y;
  out.source_width = img.width();
  out.source_height = img.height();
  out.values.assign(img.height(), 0.0);
  const auto& d = img.data();
  for (int y = 0; y < img.height(); ++y) {
    double acc = 0.0;
    const double* row = d.data() + static_cast<size_t>(y) * img.width();
    for (int x = 0; x < img.width(); ++x) acc += row[x];
    out.values[y] = acc;
  }
  return out;
}

/// Sums each image column; element x is the total intensity of column x.
/// Output length equals the image width.
inline Signal1D col_sum(const GrayImage& img) {
  Signal1D out;
  out.axis = Axis::X;
  out.source_width = img.width();
  out.source_height = img.height();
  out.values.assign(img.width(), 0.0);
  const auto& d = img.data();
  for (int y = 0; y < img.height(); ++y) {
    const double* row = d.data() + static_cast<size_t>(y) * img.width();
    for (int x = 0; x < img.width(); ++x) out.values[x] += row[x];
  }
  return out;
}

/// First derivative of the Gaussian-smoothed signal, same length as the
/// input. Implemented as a single convolution with a sampled
/// derivative-of-Gaussian kernel of radius ceil(3*sigma); edges are handled
/// by replicating the boundary samples. The kernel is rescaled so a unit
/// ramp maps to exactly 1, which also keeps constants at exactly 0.
inline Signal1D smoothed_gradient(const Signal1D& sig, double sigma) {
  if (sigma <= 0.0)
    raise(ErrorCode::InvalidArgument, "sigma must be positive");
  const int n = sig.size();
  if (n < 3)
    raise(ErrorCode::InvalidArgument,
          "signal too short for gradient: " + std::to_string(n));

  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double ramp_response = 0.0;
  for (int u = -radius; u <= radius; ++u) {
    const double g = -u * std::exp(-0.5 * u * u / (sigma * sigma));
    kernel[u + radius] = g;
    ramp_response += -static_cast<double>(u) * g;
  }
  for (double& k : kernel) k /= ramp_response;

  Signal1D out;
  out.axis = sig.axis;
  out.source_width = sig.source_width;
  out.source_height = sig.source_height;
  out.values.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int u = -radius; u <= radius; ++u) {
      const int j = std::clamp(i - u, 0, n - 1);
      acc += kernel[u + radius] * sig.values[j];
    }
    out.values[i] = acc;
  }
  return out;
}

/// Bilinear sample at continuous coordinates; integer (u,v) hits a pixel
/// center exactly. Coordinates outside the image are edge-clamped, making
/// this a total function.
inline double bilinear_sample(const GrayImage& img, double u, double v) {
  const int w = img.width(), h = img.height();
  u = std::clamp(u, 0.0, static_cast<double>(w - 1));
  v = std::clamp(v, 0.0, static_cast<double>(h - 1));
  const int x0 = std::min(static_cast<int>(u), w - 2);
  const int y0 = std::min(static_cast<int>(v), h - 2);
  const double fx = u - x0;
  const double fy = v - y0;
  const double v00 = img.at(x0, y0), v10 = img.at(x0 + 1, y0);
  const double v01 = img.at(x0, y0 + 1), v11 = img.at(x0 + 1, y0 + 1);
  return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) +
         fy * ((1.0 - fx) * v01 + fx * v11);
}

}  // namespace elgrid
