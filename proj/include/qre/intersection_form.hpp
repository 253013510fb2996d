// Copyright Contributors to the qre-toolkit Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qre/linalg.hpp"

namespace qre {

using IntMatrix = std::vector<std::vector<std::int64_t>>;

/// Raised when a matrix is not a symmetric unimodular integer form.
class FormError : public std::invalid_argument {
 public:
  FormError(const std::string& what, std::string witness)
      : std::invalid_argument(what), witness_(std::move(witness)) {}
  const std::string& witness() const { return witness_; }

 private:
  std::string witness_;
};

/// A symmetric unimodular integer bilinear form with cached invariants.
class IntersectionForm {
 public:
  /// Validates symmetry and |det| = 1; throws FormError with a witness otherwise.
  explicit IntersectionForm(IntMatrix m) : matrix_(std::move(m)) {
    const std::size_t n = matrix_.size();
    for (std::size_t i = 0; i < n; ++i)
      if (matrix_[i].size() != n)
        throw FormError("intersection form must be square", "row " + std::to_string(i));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (matrix_[i][j] != matrix_[j][i])
          throw FormError("intersection form is not symmetric",
                          "entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
    RationalMatrix q(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) q(i, j) = matrix_[i][j];
    const Rational det = n == 0 ? Rational(1) : qre::determinant(q);
    if (det != 1 && det != -1)
      throw FormError("intersection form is not unimodular", "det = " + to_string(det));
    determinant_ = static_cast<int>(det.convert_to<double>());
    auto inertia = symmetric_inertia(q);
    positive_ = inertia.positive;
    negative_ = inertia.negative;
    even_ = true;
    for (std::size_t i = 0; i < n; ++i)
      if (matrix_[i][i] % 2 != 0) even_ = false;
  }

  int rank() const { return static_cast<int>(matrix_.size()); }
  const IntMatrix& matrix() const { return matrix_; }
  int beta_plus() const { return positive_; }
  int beta_minus() const { return negative_; }
  int signature() const { return positive_ - negative_; }
  bool is_even() const { return even_; }
  int determinant() const { return determinant_; }

 private:
  IntMatrix matrix_;
  int positive_ = 0;
  int negative_ = 0;
  bool even_ = true;
  int determinant_ = 1;
};

}  // namespace qre
