// Copyright Contributors to the qre-toolkit Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>

namespace qre {

/// Forward-mode dual number carrying M directional derivatives.
template <int M>
struct Dual {
  double v = 0.0;
  std::array<double, M> d{};

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT: implicit lift of constants

  static Dual variable(double value, int slot) {
    Dual x(value);
    x.d[slot] = 1.0;
    return x;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int i = 0; i < M; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int i = 0; i < M; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (int i = 0; i < M; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    for (int i = 0; i < M; ++i) d[i] = (d[i] - v * inv * o.d[i]) * inv;
    v *= inv;
    return *this;
  }

  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
  friend Dual operator/(Dual a, const Dual& b) { return a /= b; }
  friend Dual operator-(Dual a) {
    a.v = -a.v;
    for (auto& x : a.d) x = -x;
    return a;
  }
  friend bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
  friend bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
};

template <int M>
Dual<M> sqrt(const Dual<M>& x) {
  Dual<M> r(std::sqrt(x.v));
  const double s = r.v > 0 ? 0.5 / r.v : 0.0;
  for (int i = 0; i < M; ++i) r.d[i] = s * x.d[i];
  return r;
}

template <int M>
Dual<M> sin(const Dual<M>& x) {
  Dual<M> r(std::sin(x.v));
  const double c = std::cos(x.v);
  for (int i = 0; i < M; ++i) r.d[i] = c * x.d[i];
  return r;
}

template <int M>
Dual<M> cos(const Dual<M>& x) {
  Dual<M> r(std::cos(x.v));
  const double s = -std::sin(x.v);
  for (int i = 0; i < M; ++i) r.d[i] = s * x.d[i];
  return r;
}

inline double value_of(double x) { return x; }
template <int M>
double value_of(const Dual<M>& x) {
  return x.v;
}

}  // namespace qre
