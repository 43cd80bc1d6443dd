#include "g2/heatmap.hpp"

#include <cmath>
#include <stdexcept>

#include "g2/image_io.hpp"

namespace g2 {

Tensor render_heatmap(const LandmarkSet& landmarks, int64_t height, int64_t width, double sigma,
                      HeatmapMode mode) {
  if (sigma <= 0.0) throw std::invalid_argument("render_heatmap: sigma must be positive");
  if (height < 1 || width < 1) throw std::invalid_argument("render_heatmap: empty canvas");
  landmarks.validate();
  const int64_t k = landmarks.count();
  const double r = 3.0 * sigma;
  const double r2 = r * r;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);

  const bool aggregated = mode == HeatmapMode::kAggregated;
  Tensor out(aggregated ? Shape{1, height, width} : Shape{k, height, width});

  for (int64_t i = 0; i < k; ++i) {
    const double px = landmarks.x(i);
    const double py = landmarks.y(i);
    // only pixels within the truncation radius can be nonzero
    const int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(py - r)));
    const int64_t y1 = std::min<int64_t>(height - 1, static_cast<int64_t>(std::ceil(py + r)));
    const int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(px - r)));
    const int64_t x1 = std::min<int64_t>(width - 1, static_cast<int64_t>(std::ceil(px + r)));
    double* plane = out.data() + (aggregated ? 0 : i * height * width);
    for (int64_t y = y0; y <= y1; ++y) {
      for (int64_t x = x0; x <= x1; ++x) {
        const double dx = static_cast<double>(x) - px;
        const double dy = static_cast<double>(y) - py;
        const double d2 = dx * dx + dy * dy;
        if (d2 > r2) continue;
        const double v = std::exp(-d2 * inv2s2);
        double& cell = plane[y * width + x];
        if (aggregated) {
          cell = std::max(cell, v);
        } else {
          cell = v;
        }
      }
    }
  }
  return out;
}

LandmarkSet crop_heatmap_coords(const LandmarkSet& landmarks, double dx, double dy) {
  LandmarkSet out(landmarks.count());
  for (int64_t i = 0; i < landmarks.count(); ++i) {
    out.set(i, landmarks.x(i) - dx, landmarks.y(i) - dy);
  }
  return out;
}

void export_heatmap_images(const Tensor& heatmap, const std::string& prefix) {
  if (heatmap.rank() != 3) throw std::invalid_argument("export_heatmap_images: need [K,H,W]");
  const int64_t k = heatmap.extent(0), h = heatmap.extent(1), w = heatmap.extent(2);
  for (int64_t c = 0; c < k; ++c) {
    Tensor plane(Shape{1, h, w});
    std::copy(heatmap.data() + c * h * w, heatmap.data() + (c + 1) * h * w, plane.data());
    write_pgm(prefix + "_ch" + std::to_string(c) + ".pgm", plane);
  }
  Tensor agg(Shape{1, h, w});
  for (int64_t i = 0; i < h * w; ++i) {
    double m = 0.0;
    for (int64_t c = 0; c < k; ++c) m = std::max(m, heatmap[c * h * w + i]);
    agg[i] = m;
  }
  write_pgm(prefix + "_all.pgm", agg);
}

}  // namespace g2
