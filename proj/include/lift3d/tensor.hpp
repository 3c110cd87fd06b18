#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "lift3d/error.hpp"

namespace lift3d {

// Dense row-major double tensor. Shapes are small (rank <= 3 in practice);
// hot loops index the flat `values` array directly.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a backward pass fills it

  Tensor() = default;

  static std::int64_t count(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
      require(d >= 0, errc::shape_error, "negative tensor dimension");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<std::int64_t> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.values.assign(static_cast<std::size_t>(count(t.shape)), 0.0);
    return t;
  }

  static Tensor full(std::vector<std::int64_t> shape, double v) {
    Tensor t = zeros(std::move(shape));
    for (auto& x : t.values) x = v;
    return t;
  }

  static Tensor scalar(double v) { return full({1}, v); }

  std::int64_t numel() const { return static_cast<std::int64_t>(values.size()); }
  int rank() const { return static_cast<int>(shape.size()); }

  std::int64_t dim(int i) const {
    require(i >= 0 && i < rank(), errc::shape_error, "tensor axis out of range");
    return shape[static_cast<std::size_t>(i)];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

}  // namespace lift3d
