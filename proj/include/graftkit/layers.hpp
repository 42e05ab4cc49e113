#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <graftkit/random.hpp>
#include <graftkit/tensor.hpp>

namespace graftkit {

using LayerHyper = std::map<std::string, std::int64_t>;

/*
 * A primitive differentiable transform. apply() is the pure forward pass and
 * is safe for concurrent use on a frozen layer; forward() additionally caches
 * whatever the backward pass needs. backward() consumes the cache, returns
 * the gradient w.r.t. the cached input and, when with_param_grads is set,
 * accumulates parameter gradients into the grad buffers.
 */
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor apply(const Tensor& x) const = 0;
  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& grad_out, bool with_param_grads) = 0;

  virtual std::vector<Tensor*> params() { return {}; }
  virtual std::vector<Tensor*> grads() { return {}; }
  virtual std::int64_t param_count() const { return 0; }
  virtual void zero_grad() {}

  virtual std::vector<std::int64_t> out_shape(const std::vector<std::int64_t>& in) const = 0;

  // Deep copy, parameters included bit-for-bit.
  virtual std::unique_ptr<Layer> clone() const = 0;

  // Structural copy with freshly initialized parameters. in_channels >= 1
  // overrides the layer's input width (first conv/linear of a mirrored
  // chain); pass -1 to keep the template's value.
  virtual std::unique_ptr<Layer> fresh(Rng& rng, std::int64_t in_channels) const = 0;

  virtual bool has_input_channels() const { return false; }

  virtual std::string kind() const = 0;
  virtual LayerHyper hyper() const { return {}; }
};

// 2-D convolution, stride 1, symmetric zero padding. Weight layout
// (out_channels, in_channels, k, k), bias (out_channels).
class Conv2d final : public Layer {
 public:
  Conv2d(std::int64_t in_channels, std::int64_t out_channels, std::int64_t kernel,
         std::int64_t pad = 0);

  Tensor apply(const Tensor& x) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool with_param_grads) override;

  std::vector<Tensor*> params() override { return {&weight_, &bias_}; }
  std::vector<Tensor*> grads() override { return {&weight_grad_, &bias_grad_}; }
  std::int64_t param_count() const override { return weight_.numel() + bias_.numel(); }
  void zero_grad() override;

  std::vector<std::int64_t> out_shape(const std::vector<std::int64_t>& in) const override;
  std::unique_ptr<Layer> clone() const override;
  std::unique_ptr<Layer> fresh(Rng& rng, std::int64_t in_channels) const override;
  bool has_input_channels() const override { return true; }
  std::string kind() const override { return "conv2d"; }
  LayerHyper hyper() const override;

  void init(Rng& rng);

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  std::int64_t in_channels_, out_channels_, kernel_, pad_;
  Tensor weight_, bias_;
  Tensor weight_grad_, bias_grad_;
  Tensor cached_input_;
};

// Fully connected layer on (batch, features) inputs. Weight layout
// (out_features, in_features), bias (out_features).
class Linear final : public Layer {
 public:
  Linear(std::int64_t in_features, std::int64_t out_features);

  Tensor apply(const Tensor& x) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool with_param_grads) override;

  std::vector<Tensor*> params() override { return {&weight_, &bias_}; }
  std::vector<Tensor*> grads() override { return {&weight_grad_, &bias_grad_}; }
  std::int64_t param_count() const override { return weight_.numel() + bias_.numel(); }
  void zero_grad() override;

  std::vector<std::int64_t> out_shape(const std::vector<std::int64_t>& in) const override;
  std::unique_ptr<Layer> clone() const override;
  std::unique_ptr<Layer> fresh(Rng& rng, std::int64_t in_channels) const override;
  bool has_input_channels() const override { return true; }
  std::string kind() const override { return "linear"; }
  LayerHyper hyper() const override;

  void init(Rng& rng);

 private:
  std::int64_t in_features_, out_features_;
  Tensor weight_, bias_;
  Tensor weight_grad_, bias_grad_;
  Tensor cached_input_;
};

class ReLU final : public Layer {
 public:
  Tensor apply(const Tensor& x) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool with_param_grads) override;
  std::vector<std::int64_t> out_shape(const std::vector<std::int64_t>& in) const override {
    return in;
  }
  std::unique_ptr<Layer> clone() const override;
  std::unique_ptr<Layer> fresh(Rng& rng, std::int64_t in_channels) const override;
  std::string kind() const override { return "relu"; }

 private:
  Tensor cached_input_;
};

// Non-overlapping max pooling; ties resolved to the first element in scan
// order so the backward routing is deterministic.
class MaxPool2d final : public Layer {
 public:
  explicit MaxPool2d(std::int64_t kernel, std::int64_t stride = -1);

  Tensor apply(const Tensor& x) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool with_param_grads) override;
  std::vector<std::int64_t> out_shape(const std::vector<std::int64_t>& in) const override;
  std::unique_ptr<Layer> clone() const override;
  std::unique_ptr<Layer> fresh(Rng& rng, std::int64_t in_channels) const override;
  std::string kind() const override { return "maxpool2d"; }
  LayerHyper hyper() const override;

 private:
  Tensor pool(const Tensor& x, std::vector<std::int64_t>* argmax) const;

  std::int64_t kernel_, stride_;
  std::vector<std::int64_t> cached_in_shape_;
  std::vector<std::int64_t> argmax_;
};

// (batch, c, h, w) -> (batch, c*h*w).
class Flatten final : public Layer {
 public:
  Tensor apply(const Tensor& x) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool with_param_grads) override;
  std::vector<std::int64_t> out_shape(const std::vector<std::int64_t>& in) const override;
  std::unique_ptr<Layer> clone() const override;
  std::unique_ptr<Layer> fresh(Rng& rng, std::int64_t in_channels) const override;
  std::string kind() const override { return "flatten"; }

 private:
  std::vector<std::int64_t> cached_in_shape_;
};

std::unique_ptr<Layer> make_layer(const std::string& kind, const LayerHyper& hyper);

}  // namespace graftkit
