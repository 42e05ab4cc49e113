#include <graftkit/feature_decoder.hpp>

#include <cmath>
#include <stdexcept>

#include <graftkit/adam.hpp>
#include <graftkit/losses.hpp>

namespace graftkit {

void DecodeConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("decode config: iterations must be >= 1");
  if (tv_weight < 0.0) throw std::invalid_argument("decode config: tv_weight must be >= 0");
  if (!(lr > 0.0)) throw std::invalid_argument("decode config: lr must be > 0");
}

namespace {

// Normalize to (planes, h, w) view parameters.
struct PlaneView {
  std::int64_t planes, h, w;
};

PlaneView plane_view(const Tensor& image) {
  switch (image.rank()) {
    case 2:
      return {1, image.dim(0), image.dim(1)};
    case 3:
      return {image.dim(0), image.dim(1), image.dim(2)};
    case 4:
      return {image.dim(0) * image.dim(1), image.dim(2), image.dim(3)};
    default:
      throw std::invalid_argument("tv: expected rank 2..4 image, got " +
                                  shape_str(image.shape()));
  }
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

double tv(const Tensor& image) {
  const PlaneView v = plane_view(image);
  double acc = 0.0;
  for (std::int64_t p = 0; p < v.planes; ++p) {
    const double* plane = image.data() + p * v.h * v.w;
    for (std::int64_t y = 0; y < v.h; ++y) {
      for (std::int64_t x = 0; x < v.w; ++x) {
        const double c = plane[y * v.w + x];
        if (x + 1 < v.w) acc += std::fabs(plane[y * v.w + x + 1] - c);
        if (y + 1 < v.h) acc += std::fabs(plane[(y + 1) * v.w + x] - c);
      }
    }
  }
  return acc;
}

Tensor tv_grad(const Tensor& image) {
  const PlaneView v = plane_view(image);
  Tensor grad(image.shape());
  for (std::int64_t p = 0; p < v.planes; ++p) {
    const double* plane = image.data() + p * v.h * v.w;
    double* gplane = grad.data() + p * v.h * v.w;
    for (std::int64_t y = 0; y < v.h; ++y) {
      for (std::int64_t x = 0; x < v.w; ++x) {
        const double c = plane[y * v.w + x];
        if (x + 1 < v.w) {
          const double s = sign(plane[y * v.w + x + 1] - c);
          gplane[y * v.w + x] -= s;
          gplane[y * v.w + x + 1] += s;
        }
        if (y + 1 < v.h) {
          const double s = sign(plane[(y + 1) * v.w + x] - c);
          gplane[y * v.w + x] -= s;
          gplane[(y + 1) * v.w + x] += s;
        }
      }
    }
  }
  return grad;
}

DecodeResult decode_features(const Tensor& h_hat, const BlockChain& front,
                             const DecodeConfig& cfg) {
  cfg.validate();
  const InputSpec& spec = front.input_spec();
  const auto expected = front.out_shape(1);
  std::vector<std::int64_t> target_shape = {1};
  for (std::size_t i = 1; i < expected.size(); ++i) target_shape.push_back(expected[i]);
  if (h_hat.shape() != target_shape) {
    throw std::invalid_argument("decode_features: target features " + shape_str(h_hat.shape()) +
                                " do not match front end output " + shape_str(target_shape));
  }

  Rng rng(cfg.seed);
  Tensor image({1, spec.channels, spec.height, spec.width});
  for (std::int64_t i = 0; i < image.numel(); ++i) image[i] = rng.uniform();

  // The front end stays frozen; a private copy keeps forward caches local.
  BlockChain net = front;

  Tensor grad(image.shape());
  Adam pixel_opt({&image}, {&grad}, cfg.lr);

  DecodeResult result;
  result.objective.reserve(static_cast<std::size_t>(cfg.iterations));
  result.mse_term.reserve(static_cast<std::size_t>(cfg.iterations));

  for (int it = 0; it < cfg.iterations; ++it) {
    const Tensor feat = net.forward(image);
    const double mse_value = frl(h_hat, feat);
    const double tv_value = cfg.tv_weight > 0.0 ? tv(image) : 0.0;
    const double objective = mse_value + cfg.tv_weight * tv_value;
    if (!std::isfinite(objective)) {
      throw std::runtime_error("decode_features: objective diverged at iteration " +
                               std::to_string(it));
    }
    result.objective.push_back(objective);
    result.mse_term.push_back(mse_value);

    const Tensor dfeat = frl_grad(h_hat, feat);
    Tensor dimage = net.backward(dfeat, /*with_param_grads=*/false);
    if (cfg.tv_weight > 0.0) {
      const Tensor tvg = tv_grad(image);
      for (std::int64_t i = 0; i < dimage.numel(); ++i) dimage[i] += cfg.tv_weight * tvg[i];
    }
    std::copy(dimage.data(), dimage.data() + dimage.numel(), grad.data());
    pixel_opt.step();
  }

  result.image = std::move(image);
  return result;
}

}  // namespace graftkit
