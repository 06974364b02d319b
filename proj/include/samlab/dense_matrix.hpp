#pragma once

#include <cstddef>
#include <vector>

namespace samlab {

// Row-major dense matrix: explicit test operators and diffusion covariances.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(const std::vector<double>& diag);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::vector<double> multiply(const std::vector<double>& v) const;
};

}  // namespace samlab
