#pragma once

#include <cstdint>
#include <vector>

#include "rtm/error.hpp"

namespace rtm {

// Plain row-major matrix of doubles for gradient-free sample sets (datasets,
// decoded pools, feature banks). Deliberately dumb: storage plus indexing.
struct Matrix {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int64_t r, int64_t c) : rows(r), cols(c), data(static_cast<size_t>(r * c), 0.0) {
    if (r < 0 || c < 0) throw ShapeError("Matrix: negative dimension");
  }

  double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols + c)]; }
  double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols + c)]; }
  double* row(int64_t r) { return data.data() + r * cols; }
  const double* row(int64_t r) const { return data.data() + r * cols; }
};

}  // namespace rtm
