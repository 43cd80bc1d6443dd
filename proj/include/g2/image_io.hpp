#pragma once

#include <string>

#include "g2/tensor.hpp"

namespace g2 {

// 8-bit binary PGM (P5, grayscale [1,H,W]) and PPM (P6, RGB [3,H,W]).
// Values are mapped [0,1] <-> [0,255] with round-to-nearest on write.
void write_pgm(const std::string& path, const Tensor& image);
void write_ppm(const std::string& path, const Tensor& image);
// Dispatches on channel count: 1 -> PGM, 3 -> PPM.
void write_image(const std::string& path, const Tensor& image);
// Reads either magic; returns [1,H,W] or [3,H,W].
Tensor read_image(const std::string& path);

// Horizontal concatenation of equally sized [C,H,W] images with a 1-pixel
// separator column, used for side-by-side result grids.
Tensor hstack_images(const std::vector<Tensor>& images, double separator_value = 1.0);
// Vertical concatenation of equally sized [C,H,W] rows.
Tensor vstack_images(const std::vector<Tensor>& images, double separator_value = 1.0);

}  // namespace g2
