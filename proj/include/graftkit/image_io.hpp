#pragma once

#include <string>

#include <graftkit/tensor.hpp>

namespace graftkit {

// 8-bit grayscale PNG. Tensors are (1, H, W) with values in [0, 1]; writing
// clamps, reading scales by 1/255. Color PNGs are converted to grayscale on
// read.
void write_png_gray(const std::string& path, const Tensor& image);
Tensor read_png_gray(const std::string& path);

}  // namespace graftkit
