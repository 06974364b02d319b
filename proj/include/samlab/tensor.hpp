#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "samlab/dual.hpp"

namespace samlab {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

std::string shape_string(const Shape& shape);

// Dense row-major tensor. A scalar is stored with shape {1}.
template <class T>
struct BasicTensor {
  Shape shape;
  std::vector<T> data;

  BasicTensor() = default;
  explicit BasicTensor(Shape s) : shape(std::move(s)), data(numel(shape)) {}
  BasicTensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (numel(shape) != data.size()) {
      throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_string(shape));
    }
  }

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  T& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
  const T& at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }
};

using Tensor = BasicTensor<double>;

template <class T>
bool all_finite(const BasicTensor<T>& t) {
  for (const T& x : t.data) {
    if (!std::isfinite(primal(x))) return false;
  }
  return true;
}

}  // namespace samlab
