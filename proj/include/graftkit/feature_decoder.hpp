#pragma once

#include <cstdint>
#include <vector>

#include <graftkit/model_graph.hpp>
#include <graftkit/tensor.hpp>

namespace graftkit {

struct DecodeConfig {
  int iterations = 1000;
  double lr = 1e-2;
  double tv_weight = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Anisotropic total variation: sum of absolute horizontal and vertical
// neighbor differences, summed over channels. Accepts (h, w), (c, h, w) or
// (n, c, h, w) tensors.
double tv(const Tensor& image);
// Subgradient of tv (sign convention: 0 at exact ties).
Tensor tv_grad(const Tensor& image);

struct DecodeResult {
  Tensor image;                   // optimized frame, unclamped
  std::vector<double> objective;  // per-iteration value of the full objective
  std::vector<double> mse_term;   // feature-matching term alone
};

/*
 * Feature inversion: starting from seeded uniform noise at the frame
 * resolution, optimize pixel values so the frozen intensity front end
 * reproduces the target features, with TV encouraging spatial smoothness.
 * Only the front end participates; the rest of the network is never touched.
 */
DecodeResult decode_features(const Tensor& h_hat, const BlockChain& front,
                             const DecodeConfig& cfg);

}  // namespace graftkit
