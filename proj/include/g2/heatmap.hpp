#pragma once

#include <string>

#include "g2/shape_model.hpp"
#include "g2/tensor.hpp"

namespace g2 {

enum class HeatmapMode { kPerPoint, kAggregated };

// Renders landmarks into a Gaussian likelihood map evaluated at pixel
// centers: channel k holds exp(-((x-xk)^2 + (y-yk)^2) / (2 sigma^2)),
// truncated to zero beyond Euclidean radius 3*sigma. Peak value is 1 when a
// landmark sits exactly on a pixel center. Aggregated mode emits a single
// channel holding the per-pixel max over all points.
// Returns [K,H,W] (per-point) or [1,H,W] (aggregated); values in [0,1].
Tensor render_heatmap(const LandmarkSet& landmarks, int64_t height, int64_t width, double sigma,
                      HeatmapMode mode = HeatmapMode::kPerPoint);

// Translates landmarks into the coordinate frame of a crop at (dx, dy).
// Points may leave bounds; truncation happens at render time.
LandmarkSet crop_heatmap_coords(const LandmarkSet& landmarks, double dx, double dy);

// Writes one 8-bit PGM per channel (value*255 rounded) named
// <prefix>_ch<k>.pgm plus an aggregated preview <prefix>_all.pgm.
void export_heatmap_images(const Tensor& heatmap, const std::string& prefix);

}  // namespace g2
