#include <graftkit/layers.hpp>

#include <stdexcept>

namespace graftkit {

namespace {

void require_rank(const Tensor& x, std::size_t rank, const char* who) {
  if (x.rank() != rank) {
    throw std::invalid_argument(std::string(who) + ": expected rank " + std::to_string(rank) +
                                " input, got shape " + shape_str(x.shape()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::int64_t in_channels, std::int64_t out_channels, std::int64_t kernel,
               std::int64_t pad)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      pad_(pad),
      weight_({out_channels, in_channels, kernel, kernel}),
      bias_({out_channels}),
      weight_grad_({out_channels, in_channels, kernel, kernel}),
      bias_grad_({out_channels}) {
  if (in_channels < 1 || out_channels < 1 || kernel < 1 || pad < 0) {
    throw std::invalid_argument("conv2d: invalid hyperparameters");
  }
}

void Conv2d::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels_ * kernel_ * kernel_));
  for (std::int64_t i = 0; i < weight_.numel(); ++i) weight_[i] = rng.uniform(-bound, bound);
  for (std::int64_t i = 0; i < bias_.numel(); ++i) bias_[i] = rng.uniform(-bound, bound);
}

std::vector<std::int64_t> Conv2d::out_shape(const std::vector<std::int64_t>& in) const {
  if (in.size() != 4 || in[1] != in_channels_) {
    throw std::invalid_argument("conv2d: expected (n, " + std::to_string(in_channels_) +
                                ", h, w) input, got " + shape_str(in));
  }
  const std::int64_t oh = in[2] + 2 * pad_ - kernel_ + 1;
  const std::int64_t ow = in[3] + 2 * pad_ - kernel_ + 1;
  if (oh < 1 || ow < 1) {
    throw std::invalid_argument("conv2d: input " + shape_str(in) + " smaller than kernel " +
                                std::to_string(kernel_));
  }
  return {in[0], out_channels_, oh, ow};
}

Tensor Conv2d::apply(const Tensor& x) const {
  require_rank(x, 4, "conv2d");
  const auto os = out_shape(x.shape());
  const std::int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const std::int64_t oh = os[2], ow = os[3];
  Tensor y(os);
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t oc = 0; oc < out_channels_; ++oc) {
      const double bv = bias_[oc];
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          double acc = bv;
          for (std::int64_t ic = 0; ic < in_channels_; ++ic) {
            for (std::int64_t ky = 0; ky < kernel_; ++ky) {
              const std::int64_t iy = oy + ky - pad_;
              if (iy < 0 || iy >= h) continue;
              const double* xrow = &x(b, ic, iy, 0);
              const double* wrow = &weight_(oc, ic, ky, 0);
              for (std::int64_t kx = 0; kx < kernel_; ++kx) {
                const std::int64_t ix = ox + kx - pad_;
                if (ix < 0 || ix >= w) continue;
                acc += wrow[kx] * xrow[ix];
              }
            }
          }
          y(b, oc, oy, ox) = acc;
        }
      }
    }
  }
  return y;
}

Tensor Conv2d::forward(const Tensor& x) {
  cached_input_ = x;
  return apply(x);
}

Tensor Conv2d::backward(const Tensor& grad_out, bool with_param_grads) {
  const Tensor& x = cached_input_;
  if (x.empty()) throw std::logic_error("conv2d: backward before forward");
  const std::int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const std::int64_t oh = grad_out.dim(2), ow = grad_out.dim(3);

  if (with_param_grads) {
    for (std::int64_t b = 0; b < n; ++b) {
      for (std::int64_t oc = 0; oc < out_channels_; ++oc) {
        double bacc = 0.0;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
          const double* grow = &grad_out(b, oc, oy, 0);
          for (std::int64_t ox = 0; ox < ow; ++ox) bacc += grow[ox];
          for (std::int64_t ic = 0; ic < in_channels_; ++ic) {
            for (std::int64_t ky = 0; ky < kernel_; ++ky) {
              const std::int64_t iy = oy + ky - pad_;
              if (iy < 0 || iy >= h) continue;
              const double* xrow = &x(b, ic, iy, 0);
              double* wgrow = &weight_grad_(oc, ic, ky, 0);
              for (std::int64_t kx = 0; kx < kernel_; ++kx) {
                double acc = 0.0;
                for (std::int64_t ox = 0; ox < ow; ++ox) {
                  const std::int64_t ix = ox + kx - pad_;
                  if (ix < 0 || ix >= w) continue;
                  acc += grow[ox] * xrow[ix];
                }
                wgrow[kx] += acc;
              }
            }
          }
        }
        bias_grad_[oc] += bacc;
      }
    }
  }

  Tensor grad_in(x.shape());
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t oc = 0; oc < out_channels_; ++oc) {
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        const double* grow = &grad_out(b, oc, oy, 0);
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          const double g = grow[ox];
          if (g == 0.0) continue;
          for (std::int64_t ic = 0; ic < in_channels_; ++ic) {
            for (std::int64_t ky = 0; ky < kernel_; ++ky) {
              const std::int64_t iy = oy + ky - pad_;
              if (iy < 0 || iy >= h) continue;
              double* xgrow = &grad_in(b, ic, iy, 0);
              const double* wrow = &weight_(oc, ic, ky, 0);
              for (std::int64_t kx = 0; kx < kernel_; ++kx) {
                const std::int64_t ix = ox + kx - pad_;
                if (ix < 0 || ix >= w) continue;
                xgrow[ix] += g * wrow[kx];
              }
            }
          }
        }
      }
    }
  }
  return grad_in;
}

void Conv2d::zero_grad() {
  weight_grad_.fill(0.0);
  bias_grad_.fill(0.0);
}

std::unique_ptr<Layer> Conv2d::clone() const { return std::make_unique<Conv2d>(*this); }

std::unique_ptr<Layer> Conv2d::fresh(Rng& rng, std::int64_t in_channels) const {
  auto layer = std::make_unique<Conv2d>(in_channels > 0 ? in_channels : in_channels_,
                                        out_channels_, kernel_, pad_);
  layer->init(rng);
  return layer;
}

LayerHyper Conv2d::hyper() const {
  return {{"in_channels", in_channels_},
          {"out_channels", out_channels_},
          {"kernel", kernel_},
          {"pad", pad_}};
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(std::int64_t in_features, std::int64_t out_features)
    : in_features_(in_features),
      out_features_(out_features),
      weight_({out_features, in_features}),
      bias_({out_features}),
      weight_grad_({out_features, in_features}),
      bias_grad_({out_features}) {
  if (in_features < 1 || out_features < 1) {
    throw std::invalid_argument("linear: invalid feature counts");
  }
}

void Linear::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features_));
  for (std::int64_t i = 0; i < weight_.numel(); ++i) weight_[i] = rng.uniform(-bound, bound);
  for (std::int64_t i = 0; i < bias_.numel(); ++i) bias_[i] = rng.uniform(-bound, bound);
}

std::vector<std::int64_t> Linear::out_shape(const std::vector<std::int64_t>& in) const {
  if (in.size() != 2 || in[1] != in_features_) {
    throw std::invalid_argument("linear: expected (n, " + std::to_string(in_features_) +
                                ") input, got " + shape_str(in));
  }
  return {in[0], out_features_};
}

Tensor Linear::apply(const Tensor& x) const {
  require_rank(x, 2, "linear");
  const auto os = out_shape(x.shape());
  const std::int64_t n = x.dim(0);
  Tensor y(os);
  for (std::int64_t b = 0; b < n; ++b) {
    const double* xrow = &x(b, 0);
    for (std::int64_t o = 0; o < out_features_; ++o) {
      const double* wrow = &weight_(o, 0);
      double acc = bias_[o];
      for (std::int64_t i = 0; i < in_features_; ++i) acc += wrow[i] * xrow[i];
      y(b, o) = acc;
    }
  }
  return y;
}

Tensor Linear::forward(const Tensor& x) {
  cached_input_ = x;
  return apply(x);
}

Tensor Linear::backward(const Tensor& grad_out, bool with_param_grads) {
  const Tensor& x = cached_input_;
  if (x.empty()) throw std::logic_error("linear: backward before forward");
  const std::int64_t n = x.dim(0);
  if (with_param_grads) {
    for (std::int64_t b = 0; b < n; ++b) {
      const double* xrow = &x(b, 0);
      for (std::int64_t o = 0; o < out_features_; ++o) {
        const double g = grad_out(b, o);
        bias_grad_[o] += g;
        double* wgrow = &weight_grad_(o, 0);
        for (std::int64_t i = 0; i < in_features_; ++i) wgrow[i] += g * xrow[i];
      }
    }
  }
  Tensor grad_in(x.shape());
  for (std::int64_t b = 0; b < n; ++b) {
    double* xgrow = &grad_in(b, 0);
    for (std::int64_t o = 0; o < out_features_; ++o) {
      const double g = grad_out(b, o);
      const double* wrow = &weight_(o, 0);
      for (std::int64_t i = 0; i < in_features_; ++i) xgrow[i] += g * wrow[i];
    }
  }
  return grad_in;
}

void Linear::zero_grad() {
  weight_grad_.fill(0.0);
  bias_grad_.fill(0.0);
}

std::unique_ptr<Layer> Linear::clone() const { return std::make_unique<Linear>(*this); }

std::unique_ptr<Layer> Linear::fresh(Rng& rng, std::int64_t in_channels) const {
  auto layer =
      std::make_unique<Linear>(in_channels > 0 ? in_channels : in_features_, out_features_);
  layer->init(rng);
  return layer;
}

LayerHyper Linear::hyper() const {
  return {{"in_features", in_features_}, {"out_features", out_features_}};
}

// ---------------------------------------------------------------------------
// ReLU

Tensor ReLU::apply(const Tensor& x) const {
  Tensor y = x;
  for (std::int64_t i = 0; i < y.numel(); ++i) {
    if (y[i] < 0.0) y[i] = 0.0;
  }
  return y;
}

Tensor ReLU::forward(const Tensor& x) {
  cached_input_ = x;
  return apply(x);
}

Tensor ReLU::backward(const Tensor& grad_out, bool) {
  const Tensor& x = cached_input_;
  if (x.empty()) throw std::logic_error("relu: backward before forward");
  Tensor grad_in(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) grad_in[i] = x[i] > 0.0 ? grad_out[i] : 0.0;
  return grad_in;
}

std::unique_ptr<Layer> ReLU::clone() const { return std::make_unique<ReLU>(*this); }
std::unique_ptr<Layer> ReLU::fresh(Rng&, std::int64_t) const { return std::make_unique<ReLU>(); }

// ---------------------------------------------------------------------------
// MaxPool2d

MaxPool2d::MaxPool2d(std::int64_t kernel, std::int64_t stride)
    : kernel_(kernel), stride_(stride > 0 ? stride : kernel) {
  if (kernel < 1) throw std::invalid_argument("maxpool2d: kernel must be >= 1");
}

std::vector<std::int64_t> MaxPool2d::out_shape(const std::vector<std::int64_t>& in) const {
  if (in.size() != 4) {
    throw std::invalid_argument("maxpool2d: expected rank-4 input, got " + shape_str(in));
  }
  const std::int64_t oh = (in[2] - kernel_) / stride_ + 1;
  const std::int64_t ow = (in[3] - kernel_) / stride_ + 1;
  if (oh < 1 || ow < 1) {
    throw std::invalid_argument("maxpool2d: input " + shape_str(in) + " smaller than window");
  }
  return {in[0], in[1], oh, ow};
}

Tensor MaxPool2d::pool(const Tensor& x, std::vector<std::int64_t>* argmax) const {
  const auto os = out_shape(x.shape());
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t oh = os[2], ow = os[3];
  Tensor y(os);
  if (argmax) argmax->assign(static_cast<std::size_t>(y.numel()), -1);
  std::int64_t out_idx = 0;
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        for (std::int64_t ox = 0; ox < ow; ++ox, ++out_idx) {
          double best = -1e300;
          std::int64_t best_idx = -1;
          for (std::int64_t ky = 0; ky < kernel_; ++ky) {
            const std::int64_t iy = oy * stride_ + ky;
            if (iy >= h) continue;
            for (std::int64_t kx = 0; kx < kernel_; ++kx) {
              const std::int64_t ix = ox * stride_ + kx;
              if (ix >= w) continue;
              const std::int64_t flat = ((b * c + ch) * h + iy) * w + ix;
              if (x[flat] > best) {
                best = x[flat];
                best_idx = flat;
              }
            }
          }
          y[out_idx] = best;
          if (argmax) (*argmax)[static_cast<std::size_t>(out_idx)] = best_idx;
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2d::apply(const Tensor& x) const { return pool(x, nullptr); }

Tensor MaxPool2d::forward(const Tensor& x) {
  cached_in_shape_ = x.shape();
  return pool(x, &argmax_);
}

Tensor MaxPool2d::backward(const Tensor& grad_out, bool) {
  if (cached_in_shape_.empty()) throw std::logic_error("maxpool2d: backward before forward");
  Tensor grad_in(cached_in_shape_);
  for (std::int64_t i = 0; i < grad_out.numel(); ++i) {
    grad_in[argmax_[static_cast<std::size_t>(i)]] += grad_out[i];
  }
  return grad_in;
}

std::unique_ptr<Layer> MaxPool2d::clone() const { return std::make_unique<MaxPool2d>(*this); }
std::unique_ptr<Layer> MaxPool2d::fresh(Rng&, std::int64_t) const {
  return std::make_unique<MaxPool2d>(kernel_, stride_);
}

LayerHyper MaxPool2d::hyper() const { return {{"kernel", kernel_}, {"stride", stride_}}; }

// ---------------------------------------------------------------------------
// Flatten

std::vector<std::int64_t> Flatten::out_shape(const std::vector<std::int64_t>& in) const {
  if (in.size() != 4) {
    throw std::invalid_argument("flatten: expected rank-4 input, got " + shape_str(in));
  }
  return {in[0], in[1] * in[2] * in[3]};
}

Tensor Flatten::apply(const Tensor& x) const { return x.reshaped(out_shape(x.shape())); }

Tensor Flatten::forward(const Tensor& x) {
  cached_in_shape_ = x.shape();
  return apply(x);
}

Tensor Flatten::backward(const Tensor& grad_out, bool) {
  if (cached_in_shape_.empty()) throw std::logic_error("flatten: backward before forward");
  return grad_out.reshaped(cached_in_shape_);
}

std::unique_ptr<Layer> Flatten::clone() const { return std::make_unique<Flatten>(*this); }
std::unique_ptr<Layer> Flatten::fresh(Rng&, std::int64_t) const {
  return std::make_unique<Flatten>();
}

// ---------------------------------------------------------------------------

std::unique_ptr<Layer> make_layer(const std::string& kind, const LayerHyper& hyper) {
  const auto get = [&](const char* key) {
    const auto it = hyper.find(key);
    if (it == hyper.end()) {
      throw std::invalid_argument("layer descriptor '" + kind + "' missing key '" + key + "'");
    }
    return it->second;
  };
  if (kind == "conv2d") {
    return std::make_unique<Conv2d>(get("in_channels"), get("out_channels"), get("kernel"),
                                    get("pad"));
  }
  if (kind == "linear") return std::make_unique<Linear>(get("in_features"), get("out_features"));
  if (kind == "relu") return std::make_unique<ReLU>();
  if (kind == "maxpool2d") return std::make_unique<MaxPool2d>(get("kernel"), get("stride"));
  if (kind == "flatten") return std::make_unique<Flatten>();
  throw std::invalid_argument("unknown layer kind '" + kind + "'");
}

}  // namespace graftkit
