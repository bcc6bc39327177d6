/*
 * Copyright 2026 The microvad Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MICROVAD_LINALG_HPP_
#define MICROVAD_LINALG_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "microvad/error.hpp"

// Packed lower-triangular storage, row-major: row i holds (i, 0..i) at
// offset i * (i + 1) / 2.

namespace microvad::linalg {

constexpr std::size_t packed_size(std::size_t dim) { return dim * (dim + 1) / 2; }
constexpr std::size_t packed_index(std::size_t row, std::size_t col) {
  return row * (row + 1) / 2 + col;
}

/// In-place Cholesky of a packed symmetric matrix (lower half given).
/// Throws if the matrix is not positive definite.
inline void cholesky_packed(std::span<double> a, std::size_t dim) {
  for (std::size_t j = 0; j < dim; ++j) {
    double* row_j = a.data() + packed_index(j, 0);
    double diag = row_j[j];
    for (std::size_t k = 0; k < j; ++k) diag -= row_j[k] * row_j[k];
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "matrix is not positive definite (pivot " + std::to_string(j) + ")");
    }
    const double ljj = std::sqrt(diag);
    row_j[j] = ljj;
    for (std::size_t i = j + 1; i < dim; ++i) {
      double* row_i = a.data() + packed_index(i, 0);
      double v = row_i[j];
      for (std::size_t k = 0; k < j; ++k) v -= row_i[k] * row_j[k];
      row_i[j] = v / ljj;
    }
  }
}

/// Solves L y = b for packed lower-triangular L; returns |y|^2.
inline double forward_solve_norm2(std::span<const double> l, std::span<const double> b,
                                  std::span<double> y) {
  const std::size_t dim = b.size();
  double norm2 = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double* row = l.data() + packed_index(i, 0);
    double v = b[i];
    for (std::size_t k = 0; k < i; ++k) v -= row[k] * y[k];
    y[i] = v / row[i];
    norm2 += y[i] * y[i];
  }
  return norm2;
}

}  // namespace microvad::linalg

#endif  // MICROVAD_LINALG_HPP_
