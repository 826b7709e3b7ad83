#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "wsalign/common.hpp"

namespace wsalign {

// Dense row-major float64 array with shape metadata. The only numeric
// container in the library.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int64_t> shape_in, std::vector<double> data_in)
      : shape(std::move(shape_in)), data(std::move(data_in)) {
    if (numel_of(shape) != int64_t(data.size())) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape product " +
                       std::to_string(numel_of(shape)));
    }
  }

  static int64_t numel_of(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
      if (d <= 0) throw ShapeError("tensor dimensions must be positive");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<int64_t> shape) {
    int64_t n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<double>(size_t(n), 0.0));
  }

  static Tensor full(std::vector<int64_t> shape, double v) {
    int64_t n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<double>(size_t(n), v));
  }

  int64_t numel() const { return int64_t(data.size()); }
  int64_t rows() const { return shape.at(0); }
  int64_t cols() const { return shape.at(1); }

  double& at2(int64_t r, int64_t c) { return data[size_t(r * shape[1] + c)]; }
  double at2(int64_t r, int64_t c) const {
    return data[size_t(r * shape[1] + c)];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

inline std::string shape_str(const std::vector<int64_t>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace wsalign
