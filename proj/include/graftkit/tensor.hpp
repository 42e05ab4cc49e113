#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace graftkit {

inline std::string shape_str(const std::vector<std::int64_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

/*
 * Dense row-major tensor of doubles with a dynamic rank (1..4 in practice).
 * Feature maps are stored as (batch, channels, height, width), flat vectors
 * as (batch, features). All numeric state in the toolkit lives in Tensors,
 * so copying one is a bit-exact snapshot.
 */
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(compute_numel(shape_)), 0.0);
  }

  Tensor(std::vector<std::int64_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (compute_numel(shape_) != static_cast<std::int64_t>(data_.size())) {
      throw std::invalid_argument("tensor data size " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::int64_t dim(std::size_t i) const { return shape_.at(i); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const double& operator[](std::int64_t i) const {
    return data_[static_cast<std::size_t>(i)];
  }

  double& operator()(std::int64_t a, std::int64_t b) {
    return data_[static_cast<std::size_t>(a * shape_[1] + b)];
  }
 const double& operator()(std::int64_t a, std::int64_t b) const {
    return data_[static_cast<std::size_t>(a * shape_[1] + b)];
  }
  double& operator()(std::int64_t a, std::int64_t b, std::int64_t c) {
    return data_[static_cast<std::size_t>((a * shape_[1] + b) * shape_[2] + c)];
  }
 const double& operator()(std::int64_t a, std::int64_t b, std::int64_t c) const {
    return data_[static_cast<std::size_t>((a * shape_[1] + b) * shape_[2] + c)];
  }
  double& operator()(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
    return data_[static_cast<std::size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
  }
 const double& operator()(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) const {
    return data_[static_cast<std::size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
  }

  // Same storage, new shape; element count must match.
  Tensor reshaped(std::vector<std::int64_t> new_shape) const {
    if (compute_numel(new_shape) != numel()) {
      throw std::invalid_argument("cannot reshape " + shape_str(shape_) + " to " +
                                  shape_str(new_shape));
    }
    return Tensor(std::move(new_shape), data_);
  }

  void fill(double v) { data_.assign(data_.size(), v); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  static std::int64_t compute_numel(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
      if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
      n *= d;
    }
    return shape.empty() ? 0 : n;
  }

  std::vector<std::int64_t> shape_;
  std::vector<double> data_;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("shape mismatch: " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  double m = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace graftkit
