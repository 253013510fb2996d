// Copyright Contributors to the qre-toolkit Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qre/scalar.hpp"

namespace qre {

/// Small dense row-major matrix over the exact rationals.
class RationalMatrix {
 public:
  RationalMatrix() = default;
  RationalMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, Rational(0)) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  Rational& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const Rational& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  bool is_symmetric() const {
    if (rows_ != cols_) return false;
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = i + 1; j < cols_; ++j)
        if ((*this)(i, j) != (*this)(j, i)) return false;
    return true;
  }

  friend bool operator==(const RationalMatrix&, const RationalMatrix&) = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<Rational> data_;
};

namespace detail {

/// In-place reduced row echelon form; returns pivot columns.
inline std::vector<std::size_t> rref(RationalMatrix& a) {
  std::vector<std::size_t> pivots;
  std::size_t row = 0;
  for (std::size_t col = 0; col < a.cols() && row < a.rows(); ++col) {
    std::size_t p = row;
    while (p < a.rows() && a(p, col) == 0) ++p;
    if (p == a.rows()) continue;
    if (p != row)
      for (std::size_t c = 0; c < a.cols(); ++c) std::swap(a(p, c), a(row, c));
    const Rational inv = 1 / a(row, col);
    for (std::size_t c = col; c < a.cols(); ++c) a(row, c) *= inv;
    for (std::size_t r = 0; r < a.rows(); ++r) {
      if (r == row || a(r, col) == 0) continue;
      const Rational f = a(r, col);
      for (std::size_t c = col; c < a.cols(); ++c) a(r, c) -= f * a(row, c);
    }
    pivots.push_back(col);
    ++row;
  }
  return pivots;
}

}  // namespace detail

inline std::size_t rank(RationalMatrix a) { return detail::rref(a).size(); }

/// Basis of the right null space {v : A v = 0}.
inline std::vector<std::vector<Rational>> kernel(RationalMatrix a) {
  const auto pivots = detail::rref(a);
  std::vector<bool> is_pivot(a.cols(), false);
  for (auto p : pivots) is_pivot[p] = true;
  std::vector<std::vector<Rational>> basis;
  for (std::size_t free = 0; free < a.cols(); ++free) {
    if (is_pivot[free]) continue;
    std::vector<Rational> v(a.cols(), Rational(0));
    v[free] = 1;
    for (std::size_t r = 0; r < pivots.size(); ++r) v[pivots[r]] = -a(r, free);
    basis.push_back(std::move(v));
  }
  return basis;
}

inline Rational determinant(RationalMatrix a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("determinant of a non-square matrix");
  Rational det = 1;
  const std::size_t n = a.rows();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t p = col;
    while (p < n && a(p, col) == 0) ++p;
    if (p == n) return 0;
    if (p != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(p, c), a(col, c));
      det = -det;
    }
    det *= a(col, col);
    for (std::size_t r = col + 1; r < n; ++r) {
      if (a(r, col) == 0) continue;
      const Rational f = a(r, col) / a(col, col);
      for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
    }
  }
  return det;
}

struct Inertia {
  int positive = 0;
  int negative = 0;
  int zero = 0;
  /// Diagonal of a congruent diagonal form P^T A P.
  std::vector<Rational> diagonal;
};

/// Sylvester inertia of a symmetric rational matrix by exact congruence
/// diagonalization (symmetric Gaussian elimination; a zero diagonal with a
/// nonzero off-diagonal entry a_ij is fixed by the congruence row_i += row_j).
inline Inertia symmetric_inertia(RationalMatrix a) {
  if (!a.is_symmetric()) throw std::invalid_argument("symmetric_inertia: matrix is not symmetric");
  const std::size_t n = a.rows();
  Inertia out;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    while (p < n && a(p, p) == 0) ++p;
    if (p == n) {
      // No usable diagonal pivot: look for an off-diagonal coupling.
      std::optional<std::pair<std::size_t, std::size_t>> hit;
      for (std::size_t i = k; i < n && !hit; ++i)
        for (std::size_t j = i + 1; j < n && !hit; ++j)
          if (a(i, j) != 0) hit = {i, j};
      if (!hit) {
        for (std::size_t i = k; i < n; ++i) out.diagonal.push_back(0);
        break;
      }
      auto [i, j] = *hit;
      for (std::size_t c = 0; c < n; ++c) a(i, c) += a(j, c);
      for (std::size_t r = 0; r < n; ++r) a(r, i) += a(r, j);
      p = i;
    }
    if (p != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(p, c), a(k, c));
      for (std::size_t r = 0; r < n; ++r) std::swap(a(r, p), a(r, k));
    }
    const Rational piv = a(k, k);
    for (std::size_t r = k + 1; r < n; ++r) {
      if (a(r, k) == 0) continue;
      const Rational f = a(r, k) / piv;
      for (std::size_t c = k; c < n; ++c) a(r, c) -= f * a(k, c);
      for (std::size_t rr = k; rr < n; ++rr) a(rr, r) = a(r, rr);
    }
    out.diagonal.push_back(piv);
  }
  for (const auto& d : out.diagonal) {
    if (d > 0) ++out.positive;
    else if (d < 0) ++out.negative;
    else ++out.zero;
  }
  return out;
}

}  // namespace qre
