#pragma once

#include <cstdint>
#include <vector>

#include <graftkit/random.hpp>
#include <graftkit/tensor.hpp>

namespace graftkit {

struct LabeledImage {
  Tensor image;  // (1, H, W), values in [0, 1]
  int label = 0;
};

/*
 * Procedural handwritten-style digit images for desk-scale experiments:
 * stroke skeletons rasterized at 28x28 with per-sample affine jitter
 * (rotation, scale, shear, translation), stroke width/intensity variation
 * and additive noise. Fully deterministic under the seed.
 */
Tensor render_digit(int digit, Rng& rng);

std::vector<LabeledImage> make_digit_dataset(std::size_t count, std::uint64_t seed);

}  // namespace graftkit
