#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <graftkit/tensor.hpp>

namespace graftkit {

// Adaptive-moment optimizer with bias correction; coefficients (0.9, 0.999),
// epsilon 1e-8. A zero gradient leaves parameters bit-identical.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, std::vector<Tensor*> grads, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), grads_(std::move(grads)), lr_(lr), beta1_(beta1),
        beta2_(beta2), eps_(eps) {
    if (params_.size() != grads_.size()) {
      throw std::invalid_argument("adam: parameter/gradient list size mismatch");
    }
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Tensor* p : params_) {
      m_.push_back(Tensor::zeros_like(*p));
      v_.push_back(Tensor::zeros_like(*p));
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& p = *params_[k];
      const Tensor& g = *grads_[k];
      Tensor& m = m_[k];
      Tensor& v = v_[k];
      for (std::int64_t i = 0; i < p.numel(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
        p[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
      }
    }
  }

  double lr() const { return lr_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<Tensor*> grads_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace graftkit
