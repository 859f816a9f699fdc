#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace reidrank {

/// Dense row-major matrix of doubles. May be non-square.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  static Matrix identity(std::size_t side) {
    Matrix m(side, side);
    for (std::size_t i = 0; i < side; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }

  bool operator==(const Matrix&) const = default;
};

}  // namespace reidrank
