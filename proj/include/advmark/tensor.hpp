#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <vector>

namespace advmark {

// Dense row-major tensor of doubles. Shapes follow the NCHW convention for
// batched images; 2-D tensors are (rows, cols). This is a plain value type:
// copying copies the buffer.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape), 0.0) {}
  Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    assert(static_cast<std::size_t>(count(shape)) == data.size());
  }

  static std::int64_t count(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return s.empty() ? 0 : n;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  std::size_t count() const { return data.size(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape.size()); }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(0.0); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

}  // namespace advmark
