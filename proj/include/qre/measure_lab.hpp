// Copyright Contributors to the qre-toolkit Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qre/dual.hpp"
#include "qre/parallel.hpp"

namespace qre::lab {

/// Unit vector in ℝⁿ⁺¹.
struct SpherePoint {
  std::vector<double> coords;

  explicit SpherePoint(std::vector<double> c) : coords(std::move(c)) {
    double s = 0;
    for (double v : coords) s += v * v;
    if (coords.size() < 2 || std::abs(std::sqrt(s) - 1.0) > 1e-12)
      throw std::invalid_argument("sphere point must have unit length");
  }
  int dim() const { return static_cast<int>(coords.size()) - 1; }
};

inline double sphere_volume(int n) {
  return 2.0 * std::pow(std::numbers::pi, (n + 1) / 2.0) / std::tgamma((n + 1) / 2.0);
}

inline double unit_ball_volume(int n) {
  return std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0 + 1.0);
}

namespace detail {

template <class T, int N>
using Vec = std::array<T, N>;

/// Projection from the north pole; ι(0) is the south pole.
template <int N, class T>
Vec<T, N + 1> iota(const Vec<T, N>& x) {
  T s(0.0);
  for (int i = 0; i < N; ++i) s += x[i] * x[i];
  const T inv = T(1.0) / (T(1.0) + s);
  Vec<T, N + 1> p;
  for (int i = 0; i < N; ++i) p[i] = T(2.0) * x[i] * inv;
  p[N] = (s - T(1.0)) * inv;
  return p;
}

template <int N, class T>
Vec<T, N> iota_inv(const Vec<T, N + 1>& p) {
  const T c = T(1.0) - p[N];
  if (std::abs(value_of(c)) < 1e-300) throw std::domain_error("projection pole has no preimage");
  Vec<T, N> x;
  for (int i = 0; i < N; ++i) x[i] = p[i] / c;
  return x;
}

/// Angle tripling in the last two coordinates.
template <int N, class T>
Vec<T, N + 1> winding(const Vec<T, N + 1>& p) {
  const T u = p[N - 1], v = p[N];
  const T r2 = u * u + v * v;
  if (value_of(r2) == 0.0) return p;
  Vec<T, N + 1> q = p;
  q[N - 1] = (u * u * u - T(3.0) * u * v * v) / r2;
  q[N] = (T(3.0) * u * u * v - v * v * v) / r2;
  return q;
}

/// ι(a + ι⁻¹(q)/j), regular at the projection pole.
template <int N, class T>
Vec<T, N + 1> sigma_inv(const Vec<T, N + 1>& q, const Vec<double, N>& a, double j) {
  const T c = T(1.0) - q[N];
  double a2 = 0;
  for (int i = 0; i < N; ++i) a2 += a[i] * a[i];
  T aq(0.0);
  for (int i = 0; i < N; ++i) aq += a[i] * q[i];
  const T e = c * (j * j * a2) + T(2.0 * j) * aq + (T(1.0) + q[N]);
  const T cj = c * (j * j);
  const T inv = T(1.0) / (e + cj);
  Vec<T, N + 1> out;
  for (int i = 0; i < N; ++i) out[i] = T(2.0 * j) * (T(j * a[i]) * c + q[i]) * inv;
  out[N] = (e - cj) * inv;
  return out;
}

template <int N>
double lambda_pow(const Vec<double, N>& x) {
  double s = 0;
  for (int i = 0; i < N; ++i) s += x[i] * x[i];
  return std::pow(2.0 / (1.0 + s), N);
}

}  // namespace detail

inline void require_lab_dim(int n) {
  if (n != 2 && n != 3) throw std::invalid_argument("measure lab supports n = 2 and n = 3");
}

inline SpherePoint stereographic(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  if (n < 1) throw std::invalid_argument("empty point");
  double s = 0;
  for (double v : x) s += v * v;
  std::vector<double> p(n + 1);
  for (int i = 0; i < n; ++i) p[i] = 2.0 * x[i] / (1.0 + s);
  p[n] = (s - 1.0) / (1.0 + s);
  double norm = 0;
  for (double v : p) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : p) v /= norm;
  return SpherePoint(std::move(p));
}

inline std::vector<double> stereographic_inv(const SpherePoint& p) {
  const int n = p.dim();
  const double c = 1.0 - p.coords[n];
  if (c < 1e-14) throw std::domain_error("projection pole has no preimage");
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = p.coords[i] / c;
  return x;
}

inline SpherePoint winding_F(const SpherePoint& p) {
  const int n = p.dim();
  const double u = p.coords[n - 1], v = p.coords[n];
  const double r2 = u * u + v * v;
  if (r2 == 0.0) return p;
  std::vector<double> q = p.coords;
  q[n - 1] = (u * u * u - 3 * u * v * v) / r2;
  q[n] = (3 * u * u * v - v * v * v) / r2;
  double norm = 0;
  for (double w : q) norm += w * w;
  norm = std::sqrt(norm);
  for (double& w : q) w /= norm;
  return SpherePoint(std::move(q));
}

/// Integer check that the j balls are pairwise disjoint and inside the unit ball.
/// In units of 1/j the centers are 2i - 1 - j and the radius is 1.
inline bool ball_layout_ok(std::int64_t j) {
  if (j < 1) return false;
  for (std::int64_t i = 1; i <= j; ++i) {
    const std::int64_t c = 2 * i - 1 - j;
    if ((c < 0 ? -c : c) + 1 > j) return false;
    if (i > 1 && (c - (2 * (i - 1) - 1 - j)) < 2) return false;
  }
  return true;
}

/// The maps f_j. j = 0 gives plain stereographic projection.
class MapFamily {
 public:
  MapFamily(int n, int j) : n_(n), j_(j) {
    require_lab_dim(n);
    if (j < 0) throw std::invalid_argument("family index must be non-negative");
    for (int i = 1; i <= j; ++i) centers_.push_back(-1.0 + (2.0 * i - 1.0) / j);
    orientation_ = n == 2 ? orientation_sign<2>() : orientation_sign<3>();
  }

  int n() const { return n_; }
  int j() const { return j_; }
  double radius() const { return j_ > 0 ? 1.0 / j_ : 0.0; }
  /// First coordinate of the i-th center, i in [0, j).
  const std::vector<double>& centers() const { return centers_; }
  double orientation() const { return orientation_; }

  /// Index of the winding ball containing x (open ball), or -1.
  int ball_index(std::span<const double> x) const {
    if (j_ == 0) return -1;
    const int guess = std::clamp(static_cast<int>(std::floor((x[0] + 1.0) * j_ / 2.0)), 0, j_ - 1);
    for (int i = std::max(0, guess - 1); i <= std::min(j_ - 1, guess + 1); ++i) {
      double d = (x[0] - centers_[i]) * (x[0] - centers_[i]);
      for (std::size_t k = 1; k < x.size(); ++k) d += x[k] * x[k];
      if (d < radius() * radius()) return i;
    }
    return -1;
  }

  template <int N, class T>
  detail::Vec<T, N + 1> eval(const detail::Vec<T, N>& x) const {
    double xv[N];
    for (int i = 0; i < N; ++i) xv[i] = value_of(x[i]);
    const int b = ball_index(std::span<const double>(xv, N));
    if (b < 0) return detail::iota<N>(x);
    detail::Vec<double, N> a{};
    a[0] = centers_[b];
    detail::Vec<T, N> y;
    for (int i = 0; i < N; ++i) y[i] = (x[i] - T(a[i])) * T(double(j_));
    return detail::sigma_inv<N>(detail::winding<N>(detail::iota<N>(y)), a, double(j_));
  }

  /// Differential by forward-mode dual numbers, (N+1)×N.
  template <int N>
  Eigen::Matrix<double, N + 1, N> differential(const detail::Vec<double, N>& x) const {
    using D = Dual<N>;
    detail::Vec<D, N> xd;
    for (int i = 0; i < N; ++i) xd[i] = D::variable(x[i], i);
    const auto p = eval<N>(xd);
    Eigen::Matrix<double, N + 1, N> m;
    for (int r = 0; r <= N; ++r)
      for (int c = 0; c < N; ++c) m(r, c) = p[r].d[c];
    return m;
  }

  /// Central differences, per component.
  template <int N>
  Eigen::Matrix<double, N + 1, N> differential_fd(const detail::Vec<double, N>& x,
                                                  double h = 1e-6) const {
    Eigen::Matrix<double, N + 1, N> m;
    for (int c = 0; c < N; ++c) {
      auto xp = x, xm = x;
      xp[c] += h;
      xm[c] -= h;
      const auto fp = eval<N>(xp), fm = eval<N>(xm);
      for (int r = 0; r <= N; ++r) m(r, c) = (fp[r] - fm[r]) / (2 * h);
    }
    return m;
  }

  /// Signed Jacobian against the round volume form; positive for ι.
  template <int N>
  double jacobian_from(const detail::Vec<double, N + 1>& p,
                       const Eigen::Matrix<double, N + 1, N>& df) const {
    Eigen::Matrix<double, N + 1, N + 1> m;
    for (int r = 0; r <= N; ++r) m(r, 0) = p[r];
    m.template rightCols<N>() = df;
    return orientation_ * m.determinant();
  }

  template <int N>
  double jacobian(const detail::Vec<double, N>& x) const {
    return jacobian_from<N>(eval<N>(x), differential<N>(x));
  }

  /// Jacobian by the chain rule through the conformal factors.
  template <int N>
  double jacobian_closed_form(const detail::Vec<double, N>& x) const {
    const int b = ball_index(std::span<const double>(x.data(), N));
    if (b < 0) return detail::lambda_pow<N>(x);
    const double j = j_, a0 = centers_[b];
    detail::Vec<double, N> y;
    for (int i = 0; i < N; ++i) y[i] = j * (x[i] - (i == 0 ? a0 : 0.0));
    const auto q = detail::winding<N>(detail::iota<N>(y));
    const double c = 1.0 - q[N];
    const double ratio = 2.0 / (c * (1.0 + a0 * a0) + 2.0 * a0 * q[0] / j + (1.0 + q[N]) / (j * j));
    return 3.0 * detail::lambda_pow<N>(y) * std::pow(ratio, N);
  }

 private:
  template <int N>
  double orientation_sign() const {
    using D = Dual<N>;
    detail::Vec<D, N> xd;
    for (int i = 0; i < N; ++i) xd[i] = D::variable(0.0, i);
    const auto p = detail::iota<N>(xd);
    Eigen::Matrix<double, N + 1, N + 1> m;
    for (int r = 0; r <= N; ++r) {
      m(r, 0) = p[r].v;
      for (int c = 0; c < N; ++c) m(r, c + 1) = p[r].d[c];
    }
    return m.determinant() > 0 ? 1.0 : -1.0;
  }

  int n_;
  int j_;
  std::vector<double> centers_;
  double orientation_ = 1.0;
};

inline MapFamily build_family(int n, int j) {
  if (j < 1) throw std::invalid_argument("family index must be at least 1");
  return MapFamily(n, j);
}
inline MapFamily identity_family(int n) { return MapFamily(n, 0); }

/// Evaluates f_j at a point of ℝⁿ.
inline SpherePoint evaluate(const MapFamily& f, std::span<const double> x) {
  if (static_cast<int>(x.size()) != f.n()) throw std::invalid_argument("dimension mismatch");
  std::vector<double> out(f.n() + 1);
  if (f.n() == 2) {
    const auto p = f.eval<2, double>({x[0], x[1]});
    std::copy(p.begin(), p.end(), out.begin());
  } else {
    const auto p = f.eval<3, double>({x[0], x[1], x[2]});
    std::copy(p.begin(), p.end(), out.begin());
  }
  double s = 0;
  for (double v : out) s += v * v;
  for (double& v : out) v /= std::sqrt(s);
  return SpherePoint(std::move(out));
}

/// Test functions for the vague-convergence harness.
struct TestFunction {
  enum class Type { Bump, Cutoff };
  std::string id;
  Type type = Type::Bump;
  std::vector<double> center;
  double radius = 1.0;
  double width = 0.5;  // cutoff ramp length

  double support_radius() const { return type == Type::Bump ? radius : radius + width; }

  template <class It>
  double operator()(It x, int n) const {
    double d2 = 0;
    for (int i = 0; i < n; ++i) {
      const double c = i < static_cast<int>(center.size()) ? center[i] : 0.0;
      d2 += (x[i] - c) * (x[i] - c);
    }
    if (type == Type::Bump) {
      const double t = d2 / (radius * radius);
      return t < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - t)) : 0.0;
    }
    const double d = std::sqrt(d2);
    if (d <= radius) return 1.0;
    const double t = (d - radius) / width;
    if (t >= 1.0) return 0.0;
    return 1.0 - t * t * (3.0 - 2.0 * t);
  }
};

/// Rejects functions whose support leaves the radius-2 ball.
inline void validate_test_function(const TestFunction& psi, int n) {
  if (static_cast<int>(psi.center.size()) > n)
    throw std::invalid_argument("test function '" + psi.id + "' has too many center coordinates");
  if (!(psi.radius > 0) || (psi.type == TestFunction::Type::Cutoff && !(psi.width > 0)))
    throw std::invalid_argument("test function '" + psi.id + "' needs positive radius and width");
  double c2 = 0;
  for (double v : psi.center) c2 += v * v;
  if (std::sqrt(c2) + psi.support_radius() > 2.0 + 1e-12)
    throw std::invalid_argument("test function '" + psi.id + "' is not supported in the radius-2 ball");
}

/// ½∫_{-1}^{1} ψ(t, 0, …, 0) dt by composite Simpson.
inline double segment_target(const TestFunction& psi, int n, int panels = 20000) {
  std::vector<double> x(n, 0.0);
  auto f = [&](double t) {
    x[0] = t;
    return psi(x.begin(), n);
  };
  const double h = 2.0 / panels;
  double s = f(-1.0) + f(1.0);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(-1.0 + i * h);
  return 0.5 * s * h / 3.0;
}

inline std::vector<TestFunction> default_battery() {
  using T = TestFunction::Type;
  return {
      {"unit-cutoff", T::Cutoff, {0.0, 0.0}, 1.0, 0.5},
      {"bump-right", T::Bump, {0.5, 0.0}, 0.45, 0.5},
      {"bump-offaxis", T::Bump, {0.0, 0.5}, 0.4, 0.5},
      {"bump-left", T::Bump, {-0.4, 0.0}, 0.5, 0.5},
      {"bump-wide", T::Bump, {0.0, 0.0}, 1.5, 0.5},
      {"bump-end", T::Bump, {0.9, 0.1}, 0.3, 0.5},
  };
}

/// Volume of the spherical image of the ball B(center, r) under ι.
inline double cap_volume(int n, std::span<const double> center, double r) {
  double c = 0;
  for (double v : center) c += v * v;
  c = std::sqrt(c);
  const double rho = std::atan(c + r) - std::atan(c - r);  // angular radius
  // vol(Sⁿ⁻¹)·∫₀^ρ sinⁿ⁻¹
  const int panels = 4000;
  const double h = rho / panels;
  double s = 0;
  for (int i = 0; i <= panels; ++i) {
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * std::pow(std::sin(i * h), n - 1);
  }
  return sphere_volume(n - 1) * s * h / 3.0;
}

struct QuadratureSpec {
  int grid = 2048;  // nodes across the diameter of B₂ in the plane
  int samples = 4096;  // distortion samples
  std::uint64_t seed = 0;
  unsigned workers = 0;

  void validate() const {
    if (grid < 16) throw std::invalid_argument("quadrature grid must be at least 16");
    if (samples < 1) throw std::invalid_argument("distortion samples must be positive");
  }
};

struct BallSpec {
  std::vector<double> center;
  double radius = 1.0;
};

namespace detail {

/// Sums per radial ring, then reduces each slot pairwise in ring order.
struct Accumulator {
  std::size_t slots = 0;
  std::vector<std::vector<double>> rings;
  std::vector<double> min_jacobian;
  std::vector<std::int64_t> negative;

  Accumulator(std::size_t s, std::size_t n_rings)
      : slots(s), rings(n_rings, std::vector<double>(s, 0.0)),
        min_jacobian(n_rings, std::numeric_limits<double>::infinity()), negative(n_rings, 0) {}

  std::vector<double> totals() const {
    std::vector<double> out(slots), col(rings.size());
    for (std::size_t k = 0; k < slots; ++k) {
      for (std::size_t r = 0; r < rings.size(); ++r) col[r] = rings[r][k];
      out[k] = pairwise_sum(col);
    }
    return out;
  }
  double min_j() const { return *std::min_element(min_jacobian.begin(), min_jacobian.end()); }
  std::int64_t negatives() const {
    std::int64_t s = 0;
    for (auto v : negative) s += v;
    return s;
  }
};

template <int N>
struct AngularRule {
  std::vector<Vec<double, N>> dirs;
  double weight = 0;  // solid angle per node
};

template <int N>
AngularRule<N> angular_rule(int n_phi) {
  AngularRule<N> rule;
  const double pi = std::numbers::pi;
  if constexpr (N == 2) {
    for (int k = 0; k < n_phi; ++k) {
      const double phi = 2 * pi * (k + 0.5) / n_phi;
      rule.dirs.push_back({std::cos(phi), std::sin(phi)});
    }
    rule.weight = 2 * pi / n_phi;
  } else {
    const int n_mu = std::max(2, n_phi / 2);
    for (int m = 0; m < n_mu; ++m) {
      const double mu = -1.0 + 2.0 * (m + 0.5) / n_mu, st = std::sqrt(1 - mu * mu);
      for (int k = 0; k < n_phi; ++k) {
        const double phi = 2 * pi * (k + 0.5) / n_phi;
        rule.dirs.push_back({st * std::cos(phi), st * std::sin(phi), mu});
      }
    }
    rule.weight = 4 * pi / (n_mu * n_phi);
  }
  return rule;
}

struct Resolution {
  int ball_radial, ball_angular, region_radial, region_angular;
};

inline Resolution resolution(int n, int grid) {
  if (n == 2) return {grid / 4, grid / 2, grid / 2, grid};
  return {std::max(8, grid / 16), std::max(8, grid / 8), std::max(8, grid / 8), std::max(8, grid / 4)};
}

/// Per winding ball: [∫J, ∫λⁿ, then ∫ψ_k J, ∫ψ_k λⁿ for each ψ].
template <int N>
Accumulator integrate_ball(const MapFamily& f, int b, const std::vector<TestFunction>& psi,
                           const Resolution& res, unsigned workers) {
  const auto rule = angular_rule<N>(res.ball_angular);
  const double j = f.j(), a0 = f.centers()[b];
  const int nr = res.ball_radial;
  Accumulator acc(2 + 2 * psi.size(), nr);
  const double scale = 1.0 / std::pow(j, N);
  parallel_for(
      nr,
      [&](std::size_t m) {
        const double u = (m + 0.5) / nr, s = u * u;
        const double w = 2.0 * std::pow(u, 2 * N - 1) / nr * rule.weight * scale;
        auto& out = acc.rings[m];
        for (const auto& dir : rule.dirs) {
          Vec<double, N> x;
          for (int i = 0; i < N; ++i) x[i] = s * dir[i] / j + (i == 0 ? a0 : 0.0);
          const double jac = f.jacobian<N>(x);
          const double lam = lambda_pow<N>(x);
          if (jac < acc.min_jacobian[m]) acc.min_jacobian[m] = jac;
          if (jac < -1e-9 * std::max(1.0, lam)) ++acc.negative[m];
          out[0] += w * jac;
          out[1] += w * lam;
          for (std::size_t k = 0; k < psi.size(); ++k) {
            const double p = psi[k](x.begin(), N);
            out[2 + 2 * k] += w * p * jac;
            out[3 + 2 * k] += w * p * lam;
          }
        }
      },
      workers);
  return acc;
}

/// Polar rule on B(c, ρ) for the smooth part: [∫λⁿ, then ∫ψ_k λⁿ].
template <int N>
Accumulator integrate_region_smooth(const BallSpec& region, const std::vector<TestFunction>& psi,
                                    const Resolution& res, unsigned workers) {
  const auto rule = angular_rule<N>(res.region_angular);
  const int nr = res.region_radial;
  const double rho = region.radius;
  Accumulator acc(1 + psi.size(), nr);
  parallel_for(
      nr,
      [&](std::size_t m) {
        // graded s = ρu² so large regions still resolve the origin
        const double u = (m + 0.5) / nr, s = rho * u * u;
        const double w = std::pow(s, N - 1) * 2.0 * rho * u / nr * rule.weight;
        auto& out = acc.rings[m];
        for (const auto& dir : rule.dirs) {
          Vec<double, N> x;
          for (int i = 0; i < N; ++i) x[i] = region.center[i] + s * dir[i];
          const double lam = lambda_pow<N>(x);
          out[0] += w * lam;
          for (std::size_t k = 0; k < psi.size(); ++k) out[1 + k] += w * psi[k](x.begin(), N) * lam;
        }
      },
      workers);
  return acc;
}

}  // namespace detail

/// Which winding balls lie in the region; throws if the region boundary cuts one.
inline std::vector<int> balls_inside(const MapFamily& f, const BallSpec& region) {
  std::vector<int> inside;
  for (int b = 0; b < f.j(); ++b) {
    double d2 = 0;
    for (int i = 0; i < f.n(); ++i) {
      const double a = i == 0 ? f.centers()[b] : 0.0;
      d2 += (a - region.center[i]) * (a - region.center[i]);
    }
    const double d = std::sqrt(d2), eps = 1e-12;
    if (d + f.radius() <= region.radius + eps) inside.push_back(b);
    else if (d < region.radius + f.radius() - eps)
      throw std::invalid_argument("region boundary cuts winding ball " + std::to_string(b + 1));
  }
  return inside;
}

struct AreaResult {
  double value = 0;
  double error_estimate = 0;  // |I(grid) - I(grid/2)|
  double min_jacobian = 0;
  std::int64_t negative_samples = 0;
  bool flagged = false;
};

namespace detail {

struct RegionIntegrals {
  double area = 0;
  double smooth = 0;  // ∫λⁿ
  std::vector<double> psi;  // ∫ψ J
  std::vector<double> ball_mass;
  std::vector<double> ball_smooth;
  double min_jacobian = std::numeric_limits<double>::infinity();
  std::int64_t negatives = 0;
};

template <int N>
RegionIntegrals integrate_region(const MapFamily& f, const BallSpec& region,
                                 const std::vector<TestFunction>& psi, int grid, unsigned workers) {
  const auto res = resolution(N, grid);
  const auto inside = balls_inside(f, region);
  RegionIntegrals out;
  const auto smooth = integrate_region_smooth<N>(region, psi, res, workers).totals();
  out.smooth = smooth[0];
  out.area = smooth[0];
  out.psi.assign(smooth.begin() + 1, smooth.end());
  for (int b : inside) {
    const auto acc = integrate_ball<N>(f, b, psi, res, workers);
    const auto t = acc.totals();
    out.area += t[0] - t[1];
    out.ball_mass.push_back(t[0]);
    out.ball_smooth.push_back(t[1]);
    for (std::size_t k = 0; k < psi.size(); ++k) out.psi[k] += t[2 + 2 * k] - t[3 + 2 * k];
    out.min_jacobian = std::min(out.min_jacobian, acc.min_j());
    out.negatives += acc.negatives();
  }
  return out;
}

inline RegionIntegrals integrate_region(const MapFamily& f, const BallSpec& region,
                                        const std::vector<TestFunction>& psi, int grid,
                                        unsigned workers) {
  if (static_cast<int>(region.center.size()) != f.n())
    throw std::invalid_argument("region center dimension mismatch");
  if (!(region.radius > 0)) throw std::invalid_argument("region radius must be positive");
  return f.n() == 2 ? integrate_region<2>(f, region, psi, grid, workers)
                    : integrate_region<3>(f, region, psi, grid, workers);
}

}  // namespace detail

/// ∫_region J_f with a resolution-halving error estimate.
inline AreaResult area(const MapFamily& f, const BallSpec& region, const QuadratureSpec& quad) {
  quad.validate();
  const auto fine = detail::integrate_region(f, region, {}, quad.grid, quad.workers);
  const auto coarse = detail::integrate_region(f, region, {}, quad.grid / 2, quad.workers);
  AreaResult r;
  r.value = fine.area;
  r.error_estimate = std::abs(fine.area - coarse.area);
  r.min_jacobian = fine.min_jacobian;
  r.negative_samples = fine.negatives;
  r.flagged = fine.negatives > 0;
  return r;
}

struct DistortionReport {
  double estimate = 0;  // max over all samples
  double inside_max = 0;  // samples in winding balls
  double outside_max = 0;  // samples off the winding balls
  double outside_min = 0;
  int samples = 0;
  int inside_samples = 0;
  int flagged = 0;  // samples with J <= 0
};

/// Sampled max of ‖Df‖ⁿ/J over B₂, stratified by winding balls.
inline DistortionReport distortion_estimate(const MapFamily& f, const QuadratureSpec& quad) {
  quad.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(quad.seed), static_cast<std::uint32_t>(quad.seed >> 32),
                    static_cast<std::uint32_t>(f.j())};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  const int n = f.n();
  DistortionReport rep;
  rep.outside_min = std::numeric_limits<double>::infinity();
  auto ratio = [&](const std::vector<double>& x) {
    if (n == 2) {
      const detail::Vec<double, 2> v{x[0], x[1]};
      const auto df = f.differential<2>(v);
      const double jac = f.jacobian_from<2>(f.eval<2, double>(v), df);
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(df.transpose() * df);
      return std::pair{std::pow(es.eigenvalues().maxCoeff(), 1.0), jac};
    }
    const detail::Vec<double, 3> v{x[0], x[1], x[2]};
    const auto df = f.differential<3>(v);
    const double jac = f.jacobian_from<3>(f.eval<3, double>(v), df);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(df.transpose() * df);
    return std::pair{std::pow(es.eigenvalues().maxCoeff(), 1.5), jac};
  };
  std::vector<double> x(n);
  // Half the samples uniform in B₂, half uniform in the winding balls.
  for (int s = 0; s < quad.samples; ++s) {
    const bool in_ball = f.j() > 0 && s % 2 == 1;
    const double rad = in_ball ? f.radius() : 2.0;
    double norm = 0;
    for (auto& v : x) {
      v = gauss(rng);
      norm += v * v;
    }
    const double scale = rad * std::pow(unif(rng), 1.0 / n) / std::sqrt(norm);
    for (auto& v : x) v *= scale;
    if (in_ball) x[0] += f.centers()[static_cast<std::size_t>(unif(rng) * f.j()) % f.j()];
    // keep clear of ball boundaries and the winding axis
    const int b = f.ball_index(x);
    bool skip = false;
    for (int c = 0; c < f.j(); ++c) {
      double d2 = (x[0] - f.centers()[c]) * (x[0] - f.centers()[c]);
      for (int i = 1; i < n; ++i) d2 += x[i] * x[i];
      if (std::abs(std::sqrt(d2) - f.radius()) < 1e-6) skip = true;
    }
    if (b >= 0 && std::abs(x[n - 1]) < 1e-9) skip = true;
    if (skip) continue;
    const auto [num, jac] = ratio(x);
    ++rep.samples;
    if (!(jac > 0)) {
      ++rep.flagged;
      continue;
    }
    const double k = num / jac;
    rep.estimate = std::max(rep.estimate, k);
    if (b >= 0) {
      ++rep.inside_samples;
      rep.inside_max = std::max(rep.inside_max, k);
    } else {
      rep.outside_max = std::max(rep.outside_max, k);
      rep.outside_min = std::min(rep.outside_min, k);
    }
  }
  return rep;
}

/// Winding number (n = 2) of f around f(x0) along the circle |x - x0| = eps,
/// measured in an oriented frame of the tangent plane at f(x0).
inline int local_degree(const MapFamily& f, std::span<const double> x0, double eps,
                        int samples = 4096) {
  if (f.n() != 2) throw std::invalid_argument("local degree is computed for n = 2");
  const auto q = f.eval<2, double>({x0[0], x0[1]});
  Eigen::Vector3d qv(q[0], q[1], q[2]);
  qv.normalize();
  Eigen::Vector3d e1 = std::abs(qv.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  e1 = (e1 - e1.dot(qv) * qv).normalized();
  Eigen::Vector3d e2 = qv.cross(e1);
  Eigen::Matrix3d frame;
  frame << qv, e1, e2;
  if (frame.determinant() * f.orientation() < 0) e2 = -e2;
  double total = 0, prev = 0;
  for (int s = 0; s <= samples; ++s) {
    const double t = 2 * std::numbers::pi * s / samples;
    const auto p = f.eval<2, double>({x0[0] + eps * std::cos(t), x0[1] + eps * std::sin(t)});
    const Eigen::Vector3d v(p[0] - qv.x(), p[1] - qv.y(), p[2] - qv.z());
    const double ang = std::atan2(v.dot(e2), v.dot(e1));
    if (s > 0) {
      double d = ang - prev;
      while (d > std::numbers::pi) d -= 2 * std::numbers::pi;
      while (d < -std::numbers::pi) d += 2 * std::numbers::pi;
      total += d;
    }
    prev = ang;
  }
  return static_cast<int>(std::lround(total / (2 * std::numbers::pi)));
}

struct PsiRecord {
  std::string id;
  double integral = 0;  // normalized by A(f_j)
  double target = 0;
  double abs_err = 0;
};

struct JRecord {
  int j = 0;
  double A = 0;
  double A_error = 0;
  double total = 0;
  double total_error = 0;
  double doubling_ratio = 0;
  double K_est = 0;
  double outside_fraction = 0;
  std::vector<double> ball_mass;
  std::vector<double> ball_target;
  double max_ball_rel_err = 0;
  double min_jacobian = 0;
  std::int64_t negative_samples = 0;
  std::vector<PsiRecord> psi;
  double max_psi_err = 0;
};

struct MeasureReport {
  int n = 2;
  QuadratureSpec quad;
  std::vector<TestFunction> battery;
  std::vector<JRecord> records;
};

inline MeasureReport vague_convergence_report(int n, const std::vector<int>& js,
                                              const std::vector<TestFunction>& battery,
                                              const QuadratureSpec& quad) {
  require_lab_dim(n);
  quad.validate();
  for (const auto& psi : battery) validate_test_function(psi, n);
  MeasureReport rep{n, quad, battery, {}};
  std::vector<double> targets;
  for (const auto& psi : battery) targets.push_back(segment_target(psi, n));
  const BallSpec b1{std::vector<double>(n, 0.0), 1.0}, b2{std::vector<double>(n, 0.0), 2.0};
  for (int j : js) {
    const MapFamily f = build_family(n, j);
    JRecord r;
    r.j = j;
    const auto unit = detail::integrate_region(f, b1, {}, quad.grid, quad.workers);
    const auto unit_coarse = detail::integrate_region(f, b1, {}, quad.grid / 2, quad.workers);
    const auto big = detail::integrate_region(f, b2, battery, quad.grid, quad.workers);
    const auto big_coarse = detail::integrate_region(f, b2, {}, quad.grid / 2, quad.workers);
    r.A = unit.area;
    r.A_error = std::abs(unit.area - unit_coarse.area);
    r.total = big.area;
    r.total_error = std::abs(big.area - big_coarse.area);
    r.doubling_ratio = r.total / r.A;
    r.ball_mass = big.ball_mass;
    for (int b = 0; b < j; ++b) {
      std::vector<double> c(n, 0.0);
      c[0] = f.centers()[b];
      r.ball_target.push_back(cap_volume(n, c, f.radius()) + sphere_volume(n));
      r.max_ball_rel_err = std::max(r.max_ball_rel_err,
                                    std::abs(r.ball_mass[b] - r.ball_target[b]) / r.ball_target[b]);
    }
    double ball_smooth = 0;
    for (double v : big.ball_smooth) ball_smooth += v;
    r.outside_fraction = (big.smooth - ball_smooth) / r.A;
    r.min_jacobian = std::min(unit.min_jacobian, big.min_jacobian);
    r.negative_samples = big.negatives;
    r.K_est = distortion_estimate(f, quad).estimate;
    for (std::size_t k = 0; k < battery.size(); ++k) {
      PsiRecord p{battery[k].id, big.psi[k] / r.A, targets[k], 0};
      p.abs_err = std::abs(p.integral - p.target);
      r.max_psi_err = std::max(r.max_psi_err, p.abs_err);
      r.psi.push_back(p);
    }
    rep.records.push_back(std::move(r));
  }
  return rep;
}

}  // namespace qre::lab
