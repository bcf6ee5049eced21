#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "elgrid/image.hpp"
#include "elgrid/pipeline.hpp"

namespace elgrid {

struct Rgb {
  uint8_t r, g, b;
};

/// RGB render of an image with the detection drawn on top: module outline
/// in blue, refined lattice points as green (inlier) or red (outlier)
/// crosses, raw corner estimates in yellow.
class OverlayCanvas {
public:
  explicit OverlayCanvas(const GrayImage& img)
      : width_(img.width()), height_(img.height()),
        rgb_(static_cast<size_t>(img.width()) * img.height() * 3) {
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x) {
        const auto v = static_cast<uint8_t>(
            std::lround(std::clamp(img.at(x, y), 0.0, 1.0) * 255.0));
        set(x, y, {v, v, v});
      }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<uint8_t>& rgb() const { return rgb_; }

  void set(int x, int y, Rgb c) {
    if (x < 0 || x >= width_ || y < 0 || y >= height_) return;
    const size_t at = (static_cast<size_t>(y) * width_ + x) * 3;
    rgb_[at] = c.r;
    rgb_[at + 1] = c.g;
    rgb_[at + 2] = c.b;
  }

  void line(Point a, Point b, Rgb c) {
    int x0 = static_cast<int>(std::lround(a.x));
    int y0 = static_cast<int>(std::lround(a.y));
    const int x1 = static_cast<int>(std::lround(b.x));
    const int y1 = static_cast<int>(std::lround(b.y));
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void cross(Point p, int radius, Rgb c) {
    const int x = static_cast<int>(std::lround(p.x));
    const int y = static_cast<int>(std::lround(p.y));
    for (int d = -radius; d <= radius; ++d) {
      set(x + d, y, c);
      set(x, y + d, c);
    }
  }

private:
  int width_, height_;
  std::vector<uint8_t> rgb_;
};

inline std::vector<uint8_t> render_overlay(const GrayImage& img,
                                           const DetectionResult& result) {
  OverlayCanvas canvas(img);
  constexpr Rgb kBlue{64, 96, 255}, kGreen{32, 220, 32}, kRed{230, 32, 32},
      kYellow{240, 220, 32};
  const auto outline = result.refined_corners();
  for (int k = 0; k < 4; ++k) canvas.line(outline[k], outline[(k + 1) % 4], kBlue);
  for (const Point& p : result.module_corners) canvas.cross(p, 5, kYellow);
  const int radius = std::max(2, img.width() / 400);
  for (const auto& e : result.crossings.entries)
    if (e.image) canvas.cross(*e.image, radius, e.inlier ? kGreen : kRed);
  return canvas.rgb();
}

}  // namespace elgrid
