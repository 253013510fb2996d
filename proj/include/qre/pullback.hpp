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
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <boost/math/quadrature/gauss.hpp>

#include "qre/dual.hpp"
#include "qre/exterior_algebra.hpp"
#include "qre/parallel.hpp"
#include "qre/scalar.hpp"

namespace qre::pullback {

/// Lebesgue measure of the unit ball in ℝⁿ.
inline double unit_ball_measure(int n) {
  return std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0 + 1.0);
}

/// x ↦ r·x + a.
struct AffineMapSpec {
  std::vector<double> a;
  double r = 1.0;

  void validate(int n) const {
    if (!(r > 0) || !std::isfinite(r)) throw std::invalid_argument("affine scale r must be positive");
    if (static_cast<int>(a.size()) != n) throw std::invalid_argument("translation dimension mismatch");
  }
};

struct NormalizedPullback {
  NumericMultivector form;
  Rational r_exponent;  // power of r left after normalization; always 0
  double normalization = 0;  // m_n(Bⁿ)^{-k/n}
};

/// Normalized pullback of a constant k-form under π∘T_{a,r}. T pulls a
/// k-form back with factor r^k and A(π∘T) = rⁿ·m_n(Bⁿ), so the r-powers are
/// tracked as an exact rational exponent.
inline NormalizedPullback normalized_pullback_affine(const ExactMultivector& form,
                                                     const AffineMapSpec& spec) {
  const int n = form.ambient_dim();
  spec.validate(n);
  const int k = form.pure_degree();
  if (!form.is_zero() && k < 0) throw std::invalid_argument("form must have pure degree");
  if (!form.is_zero() && (k < 1 || k > n - 1))
    throw std::invalid_argument("form degree must lie in [1, n-1]");
  const int deg = form.is_zero() ? 0 : k;
  NormalizedPullback out{NumericMultivector(n), Rational(deg) - Rational(n) * Rational(deg, n), 0};
  out.normalization = std::pow(unit_ball_measure(n), -static_cast<double>(deg) / n);
  double factor = out.normalization;
  if (out.r_exponent != 0) factor *= std::pow(spec.r, to_double(out.r_exponent));
  for (const auto& [b, c] : form.terms()) out.form.add_term(b, to_double(c) * factor);
  return out;
}

/// Pullback of dx_I under a linear map M: Σ_J det M[I, J] dx_J.
inline NumericMultivector linear_pullback(const Eigen::MatrixXd& m, const NumericMultivector& form) {
  const int n = form.ambient_dim();
  NumericMultivector out(n);
  for (const auto& [bi, ci] : form.terms()) {
    const auto rows = bi.indices();
    const int k = static_cast<int>(rows.size());
    for (Blade bj : basis_blades(n, k)) {
      const auto cols = bj.indices();
      Eigen::MatrixXd minor(k, k);
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) minor(r, c) = m(rows[r] - 1, cols[c] - 1);
      const double d = k == 0 ? 1.0 : minor.determinant();
      if (d != 0.0) out.add_term(bj, ci * d);
    }
  }
  return out;
}

/// Rotation Q, its geodesic Q_t = exp(t log Q), and the balls B_j = B(2ʲe₁, j).
struct RotatedFamilySpec {
  Eigen::MatrixXd Q;
  int first_ball = 3;  // B_j are pairwise disjoint from j = 3 on
  int last_ball = 60;

  int n() const { return static_cast<int>(Q.rows()); }

  void validate() const {
    const int n = static_cast<int>(Q.rows());
    if (n != 2 && n != 3) throw std::invalid_argument("rotated family supports n = 2 and n = 3");
    if (Q.cols() != n) throw std::invalid_argument("Q must be square");
    if ((Q.transpose() * Q - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument("Q must be orthogonal");
    if (std::abs(Q.determinant() - 1.0) > 1e-12) throw std::invalid_argument("Q must have det 1");
    if ((Q - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12)
      throw std::invalid_argument("Q must differ from the identity");
    if (first_ball < 1 || last_ball < first_ball || last_ball > 60)
      throw std::invalid_argument("ball range must satisfy 1 <= first <= last <= 60");
  }

  /// Principal logarithm: angle in (-π, π] for n = 2; axis-angle with angle
  /// in [0, π] for n = 3, axis sign fixed so its first nonzero entry is positive
  /// when the angle is π.
  std::pair<double, Eigen::Vector3d> log_data() const {
    if (n() == 2) return {std::atan2(Q(1, 0), Q(0, 0)), Eigen::Vector3d::UnitZ()};
    Eigen::Matrix3d q3 = Q;
    Eigen::AngleAxisd aa(q3);
    Eigen::Vector3d axis = aa.axis();
    if (std::abs(aa.angle() - std::numbers::pi) < 1e-12) {
      for (int i = 0; i < 3; ++i)
        if (std::abs(axis[i]) > 1e-12) {
          if (axis[i] < 0) axis = -axis;
          break;
        }
    }
    return {aa.angle(), axis};
  }

  static RotatedFamilySpec plane_rotation(int n, double angle) {
    RotatedFamilySpec s;
    s.Q = Eigen::MatrixXd::Identity(n, n);
    s.Q(0, 0) = std::cos(angle);
    s.Q(0, 1) = -std::sin(angle);
    s.Q(1, 0) = std::sin(angle);
    s.Q(1, 1) = std::cos(angle);
    // exact entries at quarter turns
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        if (std::abs(s.Q(i, j)) < 1e-15) s.Q(i, j) = 0.0;
    return s;
  }
};

namespace detail {

template <class T, int N>
using Vec = std::array<T, N>;

/// Q_t v.
template <int N, class T>
Vec<T, N> rotate(const RotatedFamilySpec& spec, const T& t, const Vec<T, N>& v) {
  const auto [theta, axis] = spec.log_data();
  using std::cos;
  using std::sin;
  const T c = cos(t * theta), s = sin(t * theta);
  if constexpr (N == 2) {
    return {c * v[0] - s * v[1], s * v[0] + c * v[1]};
  } else {
    // Rodrigues
    const T kx = T(axis[0]), ky = T(axis[1]), kz = T(axis[2]);
    const T dot = kx * v[0] + ky * v[1] + kz * v[2];
    const Vec<T, 3> cr{ky * v[2] - kz * v[1], kz * v[0] - kx * v[2], kx * v[1] - ky * v[0]};
    const Vec<T, 3> k{kx, ky, kz};
    Vec<T, 3> out;
    for (int i = 0; i < 3; ++i) out[i] = v[i] * c + cr[i] * s + k[i] * dot * (T(1.0) - c);
    return out;
  }
}

/// h_Q restricted to the single ball B_j (identity off it).
template <int N, class T>
Vec<T, N> hq_ball(const RotatedFamilySpec& spec, int j, const Vec<T, N>& x) {
  const double a0 = std::ldexp(1.0, j), r = j;
  Vec<T, N> v = x;
  v[0] = v[0] - T(a0);
  T d2(0.0);
  for (int i = 0; i < N; ++i) d2 += v[i] * v[i];
  const double d = std::sqrt(value_of(d2));
  if (d >= r) return x;
  T t(1.0);
  if (d >= r / 2) {
    using std::sqrt;
    t = T(2.0) - T(2.0 / r) * sqrt(d2);
  }
  auto w = rotate<N>(spec, t, v);
  w[0] = w[0] + T(a0);
  return w;
}

/// Which ball of the spec contains x, or 0.
inline int containing_ball(const RotatedFamilySpec& spec, const double* x, int n) {
  if (x[0] <= 0) return 0;
  const int guess = static_cast<int>(std::floor(std::log2(x[0])));
  for (int j = std::max(spec.first_ball, guess - 2); j <= std::min(spec.last_ball, guess + 2); ++j) {
    double d2 = (x[0] - std::ldexp(1.0, j)) * (x[0] - std::ldexp(1.0, j));
    for (int i = 1; i < n; ++i) d2 += x[i] * x[i];
    if (d2 < double(j) * j) return j;
  }
  return 0;
}

template <int N, class T>
Vec<T, N> hq(const RotatedFamilySpec& spec, const Vec<T, N>& x) {
  double xv[N];
  for (int i = 0; i < N; ++i) xv[i] = value_of(x[i]);
  const int j = containing_ball(spec, xv, N);
  return j == 0 ? x : hq_ball<N>(spec, j, x);
}

}  // namespace detail

inline std::vector<double> evaluate_hQ(const RotatedFamilySpec& spec, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != spec.n()) throw std::invalid_argument("dimension mismatch");
  if (spec.n() == 2) {
    const auto y = detail::hq<2, double>(spec, {x[0], x[1]});
    return {y[0], y[1]};
  }
  const auto y = detail::hq<3, double>(spec, {x[0], x[1], x[2]});
  return {y[0], y[1], y[2]};
}

/// Explicit inverse: spheres about a_j are preserved, so t is read off the image.
inline std::vector<double> inverse_hQ(const RotatedFamilySpec& spec, const std::vector<double>& y) {
  const int n = spec.n();
  if (static_cast<int>(y.size()) != n) throw std::invalid_argument("dimension mismatch");
  const int j = detail::containing_ball(spec, y.data(), n);
  if (j == 0) return y;
  const double a0 = std::ldexp(1.0, j), r = j;
  std::vector<double> v = y;
  v[0] -= a0;
  double d = 0;
  for (double c : v) d += c * c;
  d = std::sqrt(d);
  const double t = d < r / 2 ? 1.0 : 2.0 - 2.0 * d / r;
  std::vector<double> x(n);
  if (n == 2) {
    const auto w = detail::rotate<2>(spec, -t, detail::Vec<double, 2>{v[0], v[1]});
    x = {w[0], w[1]};
  } else {
    const auto w = detail::rotate<3>(spec, -t, detail::Vec<double, 3>{v[0], v[1], v[2]});
    x = {w[0], w[1], w[2]};
  }
  x[0] += a0;
  return x;
}

/// Where distortion samples are drawn, relative to ball B_j.
enum class SampleRegion { Identity, InnerBall, Annulus };

struct DistortionSummary {
  double estimate = 0;
  double min_ratio = 0;
  int samples = 0;
  int flagged = 0;  // J <= 0
};

namespace detail {

template <int N>
Eigen::Matrix<double, N, N> hq_ball_differential(const RotatedFamilySpec& spec, int j,
                                                 const Vec<double, N>& x) {
  using D = Dual<N>;
  Vec<D, N> xd;
  for (int i = 0; i < N; ++i) xd[i] = D::variable(x[i], i);
  const auto y = hq_ball<N>(spec, j, xd);
  Eigen::Matrix<double, N, N> m;
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < N; ++c) m(r, c) = y[r].d[c];
  return m;
}

template <int N>
double distortion_ratio(const Eigen::Matrix<double, N, N>& m, double* jac) {
  *jac = m.determinant();
  Eigen::JacobiSVD<Eigen::Matrix<double, N, N>> svd(m);
  return std::pow(svd.singularValues()(0), N) / *jac;
}

template <int N>
DistortionSummary hq_distortion(const RotatedFamilySpec& spec, int j, SampleRegion region,
                                int samples, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(region)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  const double r = j, a0 = std::ldexp(1.0, j);
  DistortionSummary out;
  out.min_ratio = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    Vec<double, N> dir;
    double norm = 0;
    for (auto& v : dir) {
      v = gauss(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    double rad;
    switch (region) {
      case SampleRegion::InnerBall: rad = 0.5 * r * std::pow(unif(rng), 1.0 / N); break;
      case SampleRegion::Annulus: rad = r * (0.5 + 0.5 * unif(rng)); break;
      default: rad = r * (1.0 + unif(rng)); break;
    }
    if (std::abs(rad - r) < 1e-9 * r || std::abs(rad - r / 2) < 1e-9 * r) continue;
    Vec<double, N> x;
    for (int i = 0; i < N; ++i) x[i] = dir[i] / norm * rad + (i == 0 ? a0 : 0.0);
    double jac = 0;
    const double k = distortion_ratio<N>(hq_ball_differential<N>(spec, j, x), &jac);
    ++out.samples;
    if (!(jac > 0)) {
      ++out.flagged;
      continue;
    }
    out.estimate = std::max(out.estimate, k);
    out.min_ratio = std::min(out.min_ratio, k);
  }
  return out;
}

}  // namespace detail

/// Sampled max of ‖Dh_Q‖ⁿ/J near ball B_j. Uses the single-ball formula so
/// the small balls, which overlap their neighbours, can be probed too.
inline DistortionSummary hQ_distortion_estimate(const RotatedFamilySpec& spec, int j,
                                                SampleRegion region, int samples = 4096,
                                                std::uint64_t seed = 0) {
  spec.validate();
  if (j < 1 || j > 60) throw std::invalid_argument("ball index out of range");
  if (samples < 1) throw std::invalid_argument("sample count must be positive");
  return spec.n() == 2 ? detail::hq_distortion<2>(spec, j, region, samples, seed)
                       : detail::hq_distortion<3>(spec, j, region, samples, seed);
}

/// Polar quadrature on a ball: composite Gauss-Legendre in the radius, uniform
/// azimuth, and Gauss-Legendre in the polar cosine for n = 3.
struct PolarQuadrature {
  int radial_panels = 8;
  int angular = 128;
  unsigned workers = 0;

  void validate() const {
    if (radial_panels < 1 || angular < 8) throw std::invalid_argument("quadrature too coarse");
  }
};

namespace detail {

inline const std::vector<std::pair<double, double>>& gl20() {
  static const std::vector<std::pair<double, double>> rule = [] {
    using G = boost::math::quadrature::gauss<double, 20>;
    std::vector<std::pair<double, double>> r;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    for (std::size_t i = 0; i < x.size(); ++i) {
      r.emplace_back(-x[i], w[i]);
      r.emplace_back(x[i], w[i]);
    }
    std::sort(r.begin(), r.end());
    return r;
  }();
  return rule;
}

template <int N>
struct PolarNodes {
  std::vector<double> radii, radial_weights;
  std::vector<Vec<double, N>> dirs;
  std::vector<double> dir_weights;
};

/// Nodes on B(0, R); radial weights include s^{N-1}. Panel breaks are placed
/// at every entry of `breaks` inside (0, R).
template <int N>
PolarNodes<N> polar_nodes(double radius, const PolarQuadrature& q, std::vector<double> breaks = {}) {
  PolarNodes<N> p;
  std::vector<double> edges{0.0};
  for (int i = 1; i < q.radial_panels; ++i) edges.push_back(radius * i / q.radial_panels);
  for (double b : breaks)
    if (b > 0 && b < radius) edges.push_back(b);
  edges.push_back(radius);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
    const double lo = edges[e], hi = edges[e + 1], half = 0.5 * (hi - lo);
    for (auto [x, w] : gl20()) {
      const double s = lo + half * (x + 1.0);
      p.radii.push_back(s);
      p.radial_weights.push_back(w * half * std::pow(s, N - 1));
    }
  }
  const double pi = std::numbers::pi;
  if constexpr (N == 2) {
    for (int k = 0; k < q.angular; ++k) {
      const double phi = 2 * pi * k / q.angular;
      p.dirs.push_back({std::cos(phi), std::sin(phi)});
      p.dir_weights.push_back(2 * pi / q.angular);
    }
  } else {
    const int panels = std::max(1, q.angular / 40);
    for (int pm = 0; pm < panels; ++pm) {
      const double lo = -1.0 + 2.0 * pm / panels, half = 1.0 / panels;
      for (auto [x, w] : gl20()) {
        const double mu = lo + half * (x + 1.0), st = std::sqrt(1 - mu * mu);
        for (int k = 0; k < q.angular; ++k) {
          const double phi = 2 * pi * k / q.angular;
          p.dirs.push_back({st * std::cos(phi), st * std::sin(phi), mu});
          p.dir_weights.push_back(w * half * 2 * pi / q.angular);
        }
      }
    }
  }
  return p;
}

/// Σ over polar nodes of body(x, w, out) with per-radius slots reduced pairwise.
template <int N, class Body>
std::vector<double> polar_sum(const Vec<double, N>& center, double radius, std::size_t slots,
                              const PolarQuadrature& q, Body&& body,
                              std::vector<double> breaks = {}) {
  const auto nodes = polar_nodes<N>(radius, q, std::move(breaks));
  std::vector<std::vector<double>> rings(nodes.radii.size(), std::vector<double>(slots, 0.0));
  parallel_for(
      nodes.radii.size(),
      [&](std::size_t m) {
        const double s = nodes.radii[m];
        for (std::size_t d = 0; d < nodes.dirs.size(); ++d) {
          Vec<double, N> x;
          for (int i = 0; i < N; ++i) x[i] = center[i] + s * nodes.dirs[d][i];
          body(x, nodes.radial_weights[m] * nodes.dir_weights[d], rings[m]);
        }
      },
      q.workers);
  std::vector<double> out(slots), col(rings.size());
  for (std::size_t k = 0; k < slots; ++k) {
    for (std::size_t m = 0; m < rings.size(); ++m) col[m] = rings[m][k];
    out[k] = pairwise_sum(col);
  }
  return out;
}

}  // namespace detail

/// Compactly supported test (n-k)-form: bump(|x - c| / radius)·dx_J.
struct TestForm {
  std::vector<double> center;
  double radius = 0.5;
  Blade blade;

  template <int N>
  double profile(const detail::Vec<double, N>& x) const {
    double d2 = 0;
    for (int i = 0; i < N; ++i) d2 += (x[i] - center[i]) * (x[i] - center[i]);
    const double t = d2 / (radius * radius);
    return t < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - t)) : 0.0;
  }
};

/// Eight bump forms of degree n-k supported in the unit ball.
inline std::vector<TestForm> test_form_battery(int n, int k) {
  if (k < 1 || k > n - 1) throw std::invalid_argument("form degree must lie in [1, n-1]");
  const auto blades = basis_blades(n, n - k);
  std::vector<TestForm> out;
  for (int m = 0; m < 8; ++m) {
    const double phi = 2 * std::numbers::pi * m / 8;
    std::vector<double> c(n, 0.0);
    c[0] = 0.4 * std::cos(phi);
    c[1] = 0.4 * std::sin(phi);
    if (n > 2) c[2] = m % 2 ? 0.1 : -0.1;
    out.push_back({c, 0.5 - 0.02 * (m % 3), blades[m % blades.size()]});
  }
  return out;
}

/// Coefficient of the volume form in dx_J ∧ ω.
inline double wedge_top(Blade j, const NumericMultivector& omega) {
  const int n = omega.ambient_dim();
  const std::uint32_t full = n == 32 ? ~0u : ((1u << n) - 1u);
  const Blade comp(full & ~j.mask());
  const double c = omega.coefficient(comp);
  return wedge_sign(j, comp) < 0 ? -c : c;
}

enum class Sequence { Centered, BallFollowing };
enum class Target { Lpi, QLpi };

inline std::string to_string(Sequence s) { return s == Sequence::Centered ? "centered" : "ball_following"; }
inline std::string to_string(Target t) { return t == Target::Lpi ? "L_pi" : "Q*L_pi"; }

/// Rescaling window for step j: B(-j e₁, j) or the inner half of B_j.
inline AffineMapSpec window(Sequence s, int j, int n) {
  std::vector<double> a(n, 0.0);
  if (s == Sequence::Centered) {
    a[0] = -j;
    return {a, double(j)};
  }
  a[0] = std::ldexp(1.0, j);
  return {a, j / 2.0};
}

struct LimitStep {
  int j = 0;
  double area = 0;  // A(f∘T) over the unit ball
  double delta = 0;  // max over basis forms and battery
};

struct LimitReport {
  int k = 0;
  Sequence sequence = Sequence::Centered;
  Target target = Target::Lpi;
  std::vector<LimitStep> steps;
  double floor = 0;  // max |pairing(Q*L_π − L_π, φ)| over the same battery
};

namespace detail {

/// g = h_Q ∘ T; ball-following windows use the single-ball map so small j work.
template <int N, class T>
Vec<T, N> window_map(const RotatedFamilySpec& spec, Sequence seq, int j, const AffineMapSpec& w,
                     const Vec<T, N>& x) {
  Vec<T, N> y;
  for (int i = 0; i < N; ++i) y[i] = x[i] * T(w.r) + T(w.a[i]);
  return seq == Sequence::BallFollowing ? hq_ball<N>(spec, j, y) : hq<N>(spec, y);
}

template <int N>
Eigen::MatrixXd window_differential(const RotatedFamilySpec& spec, Sequence seq, int j,
                                    const AffineMapSpec& w, const Vec<double, N>& x) {
  using D = Dual<N>;
  Vec<D, N> xd;
  for (int i = 0; i < N; ++i) xd[i] = D::variable(x[i], i);
  const auto y = window_map<N>(spec, seq, j, w, xd);
  Eigen::MatrixXd m(N, N);
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < N; ++c) m(r, c) = y[r].d[c];
  return m;
}

template <int N>
LimitReport limit_discrepancy(const RotatedFamilySpec& spec, int k, Sequence seq, Target tgt,
                              int j_max, const PolarQuadrature& q) {
  const auto battery = test_form_battery(N, k);
  const auto blades = basis_blades(N, k);
  const double m_n = unit_ball_measure(N);
  const double norm_k = std::pow(m_n, -static_cast<double>(k) / N);
  LimitReport rep{k, seq, tgt, {}, 0};

  // targets as constant forms
  std::vector<NumericMultivector> lpi, qlpi;
  for (Blade b : blades) {
    NumericMultivector e(N);
    e.add_term(b, norm_k);
    lpi.push_back(e);
    qlpi.push_back(linear_pullback(spec.Q, e));
  }
  const auto& target = tgt == Target::Lpi ? lpi : qlpi;

  // bump integrals, shared by every pairing against a constant form
  std::vector<double> bump(battery.size());
  for (std::size_t f = 0; f < battery.size(); ++f) {
    Vec<double, N> c;
    for (int i = 0; i < N; ++i) c[i] = battery[f].center[i];
    bump[f] = polar_sum<N>(c, battery[f].radius, 1, q, [&](const Vec<double, N>& x, double w,
                                                           std::vector<double>& out) {
      out[0] += w * battery[f].template profile<N>(x);
    })[0];
  }
  for (std::size_t f = 0; f < battery.size(); ++f)
    for (std::size_t i = 0; i < blades.size(); ++i)
      rep.floor = std::max(rep.floor,
                           std::abs(bump[f] * wedge_top(battery[f].blade, qlpi[i] - lpi[i])));

  const Vec<double, N> origin{};
  for (int j = 1; j <= j_max; ++j) {
    if (seq == Sequence::Centered && j > 60) break;
    const auto w = window(seq, j, N);
    LimitStep step{j, 0, 0};
    step.area = polar_sum<N>(origin, 1.0, 1, q,
                             [&](const Vec<double, N>& x, double wt, std::vector<double>& out) {
                               out[0] += wt * window_differential<N>(spec, seq, j, w, x).determinant();
                             })[0];
    const double scale = std::pow(step.area, -static_cast<double>(k) / N);
    // slots: [form f][basis i] of ∫ φ_f ∧ f^#(θ_i)
    const std::size_t slots = battery.size() * blades.size();
    const auto pair = polar_sum<N>(
        origin, 1.0, slots, q, [&](const Vec<double, N>& x, double wt, std::vector<double>& out) {
          double prof[8];
          bool any = false;
          for (std::size_t f = 0; f < battery.size(); ++f) {
            prof[f] = battery[f].template profile<N>(x);
            any = any || prof[f] != 0.0;
          }
          if (!any) return;
          const auto dg = window_differential<N>(spec, seq, j, w, x);
          for (std::size_t i = 0; i < blades.size(); ++i) {
            NumericMultivector e(N);
            e.add_term(blades[i], scale);
            const auto pulled = linear_pullback(dg, e);
            for (std::size_t f = 0; f < battery.size(); ++f)
              if (prof[f] != 0.0)
                out[f * blades.size() + i] += wt * prof[f] * wedge_top(battery[f].blade, pulled);
          }
        });
    for (std::size_t f = 0; f < battery.size(); ++f)
      for (std::size_t i = 0; i < blades.size(); ++i) {
        const double expected = bump[f] * wedge_top(battery[f].blade, target[i]);
        step.delta = std::max(step.delta, std::abs(pair[f * blades.size() + i] - expected));
      }
    rep.steps.push_back(step);
  }
  return rep;
}

}  // namespace detail

/// Weak-pairing discrepancy of the normalized pullbacks f_{a,r}^#(θ_I),
/// f = π∘h_Q, against L_π or Q*L_π over the shipped test-form battery.
inline LimitReport limit_discrepancy(const RotatedFamilySpec& spec, int k, Sequence seq, Target tgt,
                                     int j_max, const PolarQuadrature& q = {}) {
  spec.validate();
  q.validate();
  if (k < 1 || k > spec.n() - 1) throw std::invalid_argument("form degree must lie in [1, n-1]");
  if (j_max < 1) throw std::invalid_argument("j_max must be positive");
  return spec.n() == 2 ? detail::limit_discrepancy<2>(spec, k, seq, tgt, j_max, q)
                       : detail::limit_discrepancy<3>(spec, k, seq, tgt, j_max, q);
}

/// The maps for the norm bound: π∘T_{a,r}, optionally precomposed with h_Q.
struct MapSpec {
  AffineMapSpec affine;
  bool rotated = false;
  RotatedFamilySpec rotation;  // used when rotated
};

struct NormBoundResult {
  double lhs = 0;  // ‖f^!(α)‖_{n/k} over B₂
  double rhs = 0;  // D·K·‖α‖_∞
  double sharper = 0;  // D^{k/n} K^{k/n} ‖α‖_∞
  double D = 0;
  double K = 0;
  double area = 0;
  bool pass = false;
};

namespace detail {

template <int N>
Eigen::MatrixXd map_differential(const MapSpec& f, const Vec<double, N>& x) {
  using D = Dual<N>;
  Vec<D, N> y;
  for (int i = 0; i < N; ++i) y[i] = D::variable(x[i], i) * D(f.affine.r) + D(f.affine.a[i]);
  if (f.rotated) y = hq<N>(f.rotation, y);
  Eigen::MatrixXd m(N, N);
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < N; ++c) m(r, c) = y[r].d[c];
  return m;
}

/// Interface radii of h_Q balls seen from the origin of the window, for panel breaks.
inline std::vector<double> interface_breaks(const MapSpec& f) {
  std::vector<double> out;
  if (!f.rotated) return out;
  for (int j = f.rotation.first_ball; j <= f.rotation.last_ball && j < 30; ++j) {
    double d2 = 0;
    for (std::size_t i = 0; i < f.affine.a.size(); ++i) {
      const double c = (i == 0 ? std::ldexp(1.0, j) : 0.0) - f.affine.a[i];
      d2 += c * c;
    }
    const double d = std::sqrt(d2) / f.affine.r;
    for (double rr : {j / 2.0, double(j)}) {
      const double s = rr / f.affine.r;
      if (d < s) out.push_back(s - d);
      out.push_back(std::abs(d - s));
      out.push_back(d + s);
    }
  }
  return out;
}

template <int N>
NormBoundResult norm_bound(const MapSpec& f, const NumericMultivector& alpha, const PolarQuadrature& q) {
  const int k = alpha.is_zero() ? 1 : alpha.pure_degree();
  const Vec<double, N> origin{};
  const auto breaks = interface_breaks(f);
  NormBoundResult res;
  double alpha_sup = 0;
  for (const auto& [b, c] : alpha.terms()) alpha_sup += c * c;
  alpha_sup = std::sqrt(alpha_sup);
  NumericMultivector unit(N);
  if (alpha_sup > 0) {
    unit = alpha;
    unit *= 1.0 / alpha_sup;
  }
  const double p = static_cast<double>(N) / k;
  // slots: ∫_{B¹} J, ∫_{B₂} J, ∫_{B₂} |f*(α/|α|)|^p
  auto body = [&](const Vec<double, N>& x, double w, std::vector<double>& out) {
    const auto dg = map_differential<N>(f, x);
    double r2 = 0;
    for (int i = 0; i < N; ++i) r2 += x[i] * x[i];
    const double jac = dg.determinant();
    if (r2 < 1.0) out[0] += w * jac;
    out[1] += w * jac;
    if (alpha_sup > 0) {
      const auto pulled = linear_pullback(dg, unit);
      double m = 0;
      for (const auto& [b, c] : pulled.terms()) m += c * c;
      out[2] += w * std::pow(std::sqrt(m), p);
    }
  };
  auto br = breaks;
  br.push_back(1.0);
  const auto sums = polar_sum<N>(origin, 2.0, 3, q, body, br);
  res.area = sums[0];
  res.D = sums[1] / sums[0];
  // sampled distortion over B₂
  std::mt19937_64 rng(0);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  res.K = 1.0;
  for (int s = 0; s < 2048; ++s) {
    Vec<double, N> x;
    double norm = 0;
    for (auto& v : x) {
      v = gauss(rng);
      norm += v * v;
    }
    const double rad = 2.0 * std::pow(unif(rng), 1.0 / N) / std::sqrt(norm);
    for (auto& v : x) v *= rad;
    Eigen::Matrix<double, N, N> dg = map_differential<N>(f, x);
    double jac = 0;
    const double kk = distortion_ratio<N>(dg, &jac);
    if (jac > 0) res.K = std::max(res.K, kk);
  }
  const double scale = std::pow(res.area, -static_cast<double>(k) / N);
  res.lhs = alpha_sup > 0 ? alpha_sup * scale * std::pow(sums[2], 1.0 / p) : 0.0;
  res.rhs = res.D * res.K * alpha_sup;
  res.sharper = std::pow(res.D * res.K, static_cast<double>(k) / N) * alpha_sup;
  return res;
}

}  // namespace detail

/// ‖f^!(α)‖_{n/k, B₂} against D·K·‖α‖_∞ with D and K measured for f.
inline NormBoundResult norm_bound_check(const MapSpec& f, const NumericMultivector& alpha,
                                        const PolarQuadrature& q = {}, double tol = 1e-3) {
  const int n = alpha.ambient_dim();
  f.affine.validate(n);
  if (f.rotated) {
    f.rotation.validate();
    if (f.rotation.n() != n) throw std::invalid_argument("rotation dimension mismatch");
  }
  if (n != 2 && n != 3) throw std::invalid_argument("norm bound supports n = 2 and n = 3");
  const int k = alpha.pure_degree();
  if (!alpha.is_zero() && (k < 1 || k > n - 1))
    throw std::invalid_argument("form degree must lie in [1, n-1]");
  q.validate();
  auto res = n == 2 ? detail::norm_bound<2>(f, alpha, q) : detail::norm_bound<3>(f, alpha, q);
  res.pass = res.lhs <= res.rhs + tol;
  return res;
}

/// g(θ) = Π_i trig_i(m_i θ_i) on ℝⁿ/2πℤⁿ, a 0-form with analytic gradient.
struct TrigFunction {
  std::string id;
  std::vector<int> freq;
  std::vector<bool> use_sin;

  bool closed() const {
    for (std::size_t i = 0; i < freq.size(); ++i)
      if (freq[i] != 0) return false;
    return true;
  }
  /// ∂_c g at θ.
  template <class V>
  double partial(int c, const V& th) const {
    double v = 1;
    for (std::size_t i = 0; i < freq.size(); ++i) {
      const double a = freq[i] * th[i];
      if (static_cast<int>(i) == c)
        v *= use_sin[i] ? freq[i] * std::cos(a) : -freq[i] * std::sin(a);
      else
        v *= use_sin[i] ? std::sin(a) : std::cos(a);
    }
    return v;
  }
};

/// Lipschitz test (n-1)-form: tent(|x - c| / R)·dx_{J}, J the complement of `slot`.
struct TentForm {
  std::vector<double> center;
  double radius = 1.0;
  int slot = 0;
  double scale = 1.0;
};

inline std::vector<TrigFunction> trig_battery(int n) {
  std::vector<TrigFunction> out;
  out.push_back({"sin-cos", std::vector<int>(n, 1), std::vector<bool>(n, false)});
  out.back().use_sin[0] = true;
  out.push_back({"mixed-freq", std::vector<int>(n, 1), std::vector<bool>(n, true)});
  out.back().freq[0] = 2;
  return out;
}

inline TentForm default_tent(int n) {
  std::vector<double> c(n, 0.0);
  c[0] = 0.3;
  c[1] = -0.2;
  return {c, 1.2, 0, 1.0};
}

struct DecayStep {
  int j = 0;
  double r = 0;
  double area = 0;
  double integral = 0;  // |∫ φ ∧ f_j^!(dα)|
  double ratio = 0;  // integral · A^{1/n}
};

struct DecayReport {
  std::string alpha_id;
  std::vector<DecayStep> steps;
  double C = 0;  // max ratio
  double max_over_min = 0;
  double kendall_tau = 0;
};

inline double kendall_tau(const std::vector<double>& y) {
  int conc = 0, disc = 0;
  for (std::size_t a = 0; a < y.size(); ++a)
    for (std::size_t b = a + 1; b < y.size(); ++b) {
      if (y[b] > y[a]) ++conc;
      else if (y[b] < y[a]) ++disc;
    }
  const double pairs = y.size() * (y.size() - 1) / 2.0;
  return pairs > 0 ? (conc - disc) / pairs : 0.0;
}

namespace detail {

template <int N>
DecayReport exact_decay(const TrigFunction& g, const TentForm& phi, const std::vector<int>& js,
                        const PolarQuadrature& q) {
  DecayReport rep{g.id, {}, 0, 0, 0};
  const double m_n = unit_ball_measure(N);
  Vec<double, N> c;
  for (int i = 0; i < N; ++i) c[i] = phi.center[i];
  // sign of dx_J ∧ dx_slot
  const std::uint32_t full = (1u << N) - 1u;
  const Blade slot_blade(1u << phi.slot), comp(full & ~slot_blade.mask());
  const double sign = wedge_sign(comp, slot_blade) < 0 ? -1.0 : 1.0;
  for (int j : js) {
    const double r = std::ldexp(1.0, j), area = std::pow(r, N) * m_n;
    PolarQuadrature qj = q;
    // resolve the oscillation r·x across the support
    qj.angular = std::max(q.angular, static_cast<int>(std::ceil(8 * r * phi.radius)));
    qj.radial_panels = std::max(q.radial_panels, static_cast<int>(std::ceil(r * phi.radius)));
    const double value =
        g.closed() || phi.scale == 0.0
            ? 0.0
            : polar_sum<N>(c, phi.radius, 1, qj,
                           [&](const Vec<double, N>& x, double w, std::vector<double>& out) {
                             double d2 = 0;
                             for (int i = 0; i < N; ++i) d2 += (x[i] - c[i]) * (x[i] - c[i]);
                             const double tent = std::max(0.0, 1.0 - std::sqrt(d2) / phi.radius);
                             Vec<double, N> th;
                             for (int i = 0; i < N; ++i) th[i] = r * x[i];
                             out[0] += w * tent * r * g.partial(phi.slot, th);
                           })[0];
    DecayStep s{j, r, area, std::abs(phi.scale * sign * std::pow(area, -1.0 / N) * value), 0};
    s.ratio = s.integral * std::pow(area, 1.0 / N);
    rep.steps.push_back(s);
  }
  std::vector<double> ratios;
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& s : rep.steps) {
    ratios.push_back(s.ratio);
    rep.C = std::max(rep.C, s.ratio);
    lo = std::min(lo, s.ratio);
  }
  rep.max_over_min = lo > 0 ? rep.C / lo : std::numeric_limits<double>::infinity();
  if (rep.C == 0) rep.max_over_min = 0;
  rep.kendall_tau = kendall_tau(ratios);
  return rep;
}

}  // namespace detail

/// |∫ φ ∧ f_j^!(dα)| along the coverings π_{0, 2ʲ}, with the ratio against A^{-1/n}.
inline DecayReport exact_decay_check(int n, const TrigFunction& g, const TentForm& phi,
                                     const std::vector<int>& js, const PolarQuadrature& q = {}) {
  if (n != 2 && n != 3) throw std::invalid_argument("decay check supports n = 2 and n = 3");
  if (static_cast<int>(g.freq.size()) != n || static_cast<int>(g.use_sin.size()) != n)
    throw std::invalid_argument("torus function dimension mismatch");
  if (static_cast<int>(phi.center.size()) != n || !(phi.radius > 0) || phi.slot < 0 || phi.slot >= n)
    throw std::invalid_argument("malformed test form");
  double c2 = 0;
  for (double v : phi.center) c2 += v * v;
  if (std::sqrt(c2) + phi.radius > 2.0) throw std::invalid_argument("test form must be supported in B_2");
  for (int j : js)
    if (j < 0 || j > 20) throw std::invalid_argument("covering index out of range");
  q.validate();
  return n == 2 ? detail::exact_decay<2>(g, phi, js, q) : detail::exact_decay<3>(g, phi, js, q);
}

}  // namespace qre::pullback
