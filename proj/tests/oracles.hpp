// Copyright Contributors to the qre-toolkit Project
// SPDX-License-Identifier: Apache-2.0

// Reference computations written independently of the library internals.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qre/scalar.hpp"

namespace oracle {

using qre::Rational;

/// Sign that sorts a list of distinct indices (bubble sort swaps), 0 on repeats.
inline int sort_sign(std::vector<int> v) {
  int sign = 1;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j + 1 < v.size() - i; ++j) {
      if (v[j] == v[j + 1]) return 0;
      if (v[j] > v[j + 1]) {
        std::swap(v[j], v[j + 1]);
        sign = -sign;
      }
    }
  for (std::size_t i = 0; i + 1 < v.size(); ++i)
    if (v[i] == v[i + 1]) return 0;
  return sign;
}

/// Multivector as index-list → coefficient.
using Form = std::map<std::vector<int>, Rational>;

inline Form wedge(const Form& a, const Form& b) {
  Form out;
  for (const auto& [ia, ca] : a)
    for (const auto& [ib, cb] : b) {
      std::vector<int> cat = ia;
      cat.insert(cat.end(), ib.begin(), ib.end());
      const int s = sort_sign(cat);
      if (s == 0) continue;
      std::sort(cat.begin(), cat.end());
      out[cat] += s * ca * cb;
    }
  for (auto it = out.begin(); it != out.end();)
    it = it->second == 0 ? out.erase(it) : std::next(it);
  return out;
}

/// All k-subsets of {1..n} in lexicographic order.
inline std::vector<std::vector<int>> subsets(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  auto rec = [&](auto&& self, int start) -> void {
    if (static_cast<int>(cur.size()) == k) {
      out.push_back(cur);
      return;
    }
    for (int i = start; i <= n; ++i) {
      cur.push_back(i);
      self(self, i + 1);
      cur.pop_back();
    }
  };
  rec(rec, 1);
  return out;
}

/// Gram matrix of (I, J) ↦ coefficient of e_{1..n} in e_I ∧ e_J.
inline Eigen::MatrixXd pairing_gram(int n, int k) {
  const auto s = subsets(n, k);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(s.size(), s.size());
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b) {
      std::vector<int> cat = s[a];
      cat.insert(cat.end(), s[b].begin(), s[b].end());
      g(a, b) = sort_sign(cat);
    }
  return g;
}

struct Inertia {
  int positive = 0, negative = 0, zero = 0;
};

/// Brute-force diagonalization by a dense symmetric eigen-solver.
inline Inertia eigen_inertia(const Eigen::MatrixXd& m, double tol = 1e-9) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Inertia r;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double v = es.eigenvalues()(i);
    if (v > tol) ++r.positive;
    else if (v < -tol) ++r.negative;
    else ++r.zero;
  }
  return r;
}

inline int numeric_rank(const Eigen::MatrixXd& m) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  lu.setThreshold(1e-10);
  return static_cast<int>(lu.rank());
}

inline double binomial(int n, int k) {
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// ∫_{B(c, r)} (2/(1+|x|²))² dx on a polar mesh about c, which is the spherical
/// area of the image of the disk under stereographic projection.
inline double disk_image_area(double cx, double cy, double r, int radial = 2000, int angular = 2000) {
  double s = 0;
  for (int i = 0; i < radial; ++i) {
    const double rho = r * (i + 0.5) / radial;
    for (int k = 0; k < angular; ++k) {
      const double t = 2 * std::numbers::pi * (k + 0.5) / angular;
      const double x = cx + rho * std::cos(t), y = cy + rho * std::sin(t);
      const double lam = 2.0 / (1.0 + x * x + y * y);
      s += lam * lam * rho;
    }
  }
  return s * (r / radial) * (2 * std::numbers::pi / angular);
}

/// Planar angle tripling (r, θ) ↦ (r, 3θ): the distortion ‖Df‖²/J from the
/// explicit Cartesian Jacobian, maximized over a polar mesh.
inline double angle_tripling_distortion(int mesh = 200) {
  double worst = 0;
  for (int i = 1; i <= mesh; ++i)
    for (int k = 0; k < mesh; ++k) {
      const double r = double(i) / mesh, t = 2 * std::numbers::pi * (k + 0.5) / mesh;
      const double x = r * std::cos(t), y = r * std::sin(t);
      // f = r (cos 3θ, sin 3θ); ∂r/∂x = x/r, ∂θ/∂x = -y/r², etc.
      const double drdx = x / r, drdy = y / r, dtdx = -y / (r * r), dtdy = x / (r * r);
      const double c3 = std::cos(3 * t), s3 = std::sin(3 * t);
      Eigen::Matrix2d df;
      df(0, 0) = drdx * c3 - r * 3 * s3 * dtdx;
      df(0, 1) = drdy * c3 - r * 3 * s3 * dtdy;
      df(1, 0) = drdx * s3 + r * 3 * c3 * dtdx;
      df(1, 1) = drdy * s3 + r * 3 * c3 * dtdy;
      Eigen::JacobiSVD<Eigen::Matrix2d> svd(df);
      const double smax = svd.singularValues()(0);
      worst = std::max(worst, smax * smax / df.determinant());
    }
  return worst;
}

/// Planar twist (ρ, θ) ↦ (ρ, θ + g(ρ)) with ρ·g' = s: in an orthonormal polar
/// frame the differential is [[1, 0], [s, 1]], so ‖Df‖²/J = σ_max² with
/// σ_max = (s + √(s² + 4))/2.
inline double twist_distortion(double s) {
  const double sigma = (std::abs(s) + std::sqrt(s * s + 4.0)) / 2.0;
  return sigma * sigma;
}

/// ∫ over a tensor midpoint grid on [-R, R]ⁿ (n = 2) of f.
template <class F>
double grid_integral_2d(double R, int m, F&& f) {
  const double h = 2 * R / m;
  double s = 0;
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < m; ++k) s += f(-R + (i + 0.5) * h, -R + (k + 0.5) * h);
  return s * h * h;
}

/// Kendall rank correlation against the index order.
inline double kendall(const std::vector<double>& y) {
  double c = 0, d = 0;
  for (std::size_t a = 0; a < y.size(); ++a)
    for (std::size_t b = a + 1; b < y.size(); ++b) {
      if (y[b] > y[a]) c += 1;
      if (y[b] < y[a]) d += 1;
    }
  return (c - d) / (y.size() * (y.size() - 1) / 2.0);
}

}  // namespace oracle
