// Copyright Contributors to the qre-toolkit Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qre/exterior_algebra.hpp"
#include "qre/intersection_form.hpp"
#include "qre/linalg.hpp"
#include "qre/scalar.hpp"

namespace qre {

/// An element of H^k written in the degree-k basis of a ring.
struct CohomologyClass {
  int degree = 0;
  std::vector<Rational> coords;

  bool is_zero() const {
    for (const auto& c : coords)
      if (c != 0) return false;
    return true;
  }
  friend bool operator==(const CohomologyClass&, const CohomologyClass&) = default;
};

struct ValidationReport {
  bool valid = true;
  std::string axiom;   // first failing axiom, empty when valid
  std::string detail;  // witness for the failure
};

/// Finite-dimensional graded-commutative algebra presented by structure
/// constants. Degree-k basis classes are indexed 0..b_k-1; the unit is the
/// single degree-0 class and the top degree carries one class whose value
/// under `fundamental` is normally 1.
class RingPresentation {
 public:
  RingPresentation() = default;

  /// Allocates zero structure constants for the given Betti numbers.
  RingPresentation(int n, std::vector<int> betti) : n_(n), betti_(std::move(betti)) {
    if (n < 1) throw std::invalid_argument("formal dimension must be positive");
    if (static_cast<int>(betti_.size()) != n + 1)
      throw std::invalid_argument("betti vector must have n+1 entries");
    for (int b : betti_)
      if (b < 0) throw std::invalid_argument("betti numbers must be nonnegative");
    labels_.resize(n + 1);
    for (int k = 0; k <= n; ++k)
      for (int a = 0; a < betti_[k]; ++a)
        labels_[k].push_back("x" + std::to_string(k) + "_" + std::to_string(a + 1));
    for (int j = 0; j <= n; ++j)
      for (int k = 0; j + k <= n; ++k)
        sc_[{j, k}] = std::vector<Rational>(
            static_cast<std::size_t>(betti_[j]) * betti_[k] * betti_[j + k], Rational(0));
    fundamental_.assign(betti_[n], Rational(0));
  }

  int formal_dim() const { return n_; }
  const std::vector<int>& betti() const { return betti_; }
  int betti(int k) const { return (k < 0 || k > n_) ? 0 : betti_[k]; }
  const std::vector<std::vector<std::string>>& labels() const { return labels_; }
  std::vector<std::vector<std::string>>& labels() { return labels_; }
  const std::vector<Rational>& fundamental() const { return fundamental_; }
  std::vector<Rational>& fundamental() { return fundamental_; }

  /// Coefficient of basis class c (degree j+k) in x_a · x_b (degrees j, k).
  const Rational& sc(int j, int k, int a, int b, int c) const {
    return sc_.at({j, k})[offset(j, k, a, b, c)];
  }
  Rational& sc(int j, int k, int a, int b, int c) {
    return sc_.at({j, k})[offset(j, k, a, b, c)];
  }

  CohomologyClass zero(int k) const { return {k, std::vector<Rational>(betti(k), Rational(0))}; }
  CohomologyClass basis(int k, int a) const {
    auto x = zero(k);
    x.coords.at(a) = 1;
    return x;
  }
  CohomologyClass unit() const { return basis(0, 0); }

  /// Value of the fundamental functional on a top-degree class.
  Rational evaluate(const CohomologyClass& top) const {
    if (top.degree != n_) throw std::invalid_argument("fundamental evaluates only top classes");
    Rational s = 0;
    for (int c = 0; c < betti_[n_]; ++c) s += fundamental_[c] * top.coords[c];
    return s;
  }

  /// Sets x_a · x_b = sum_c coeffs[c] x_c together with the graded-commutative
  /// partner x_b · x_a.
  void set_product(int j, int a, int k, int b, const std::vector<Rational>& coeffs) {
    const int sign = ((j * k) % 2) ? -1 : 1;
    for (int c = 0; c < betti(j + k); ++c) {
      sc(j, k, a, b, c) = coeffs.at(c);
      sc(k, j, b, a, c) = sign * coeffs.at(c);
    }
  }

  /// Fills in products with the unit.
  void set_unit_products() {
    for (int k = 0; k <= n_; ++k)
      for (int a = 0; a < betti_[k]; ++a) {
        sc(0, k, 0, a, a) = 1;
        sc(k, 0, a, 0, a) = 1;
      }
  }

  friend bool operator==(const RingPresentation&, const RingPresentation&) = default;

 private:
  std::size_t offset(int j, int k, int a, int b, int c) const {
    return (static_cast<std::size_t>(a) * betti_[k] + b) * betti_[j + k] + c;
  }

  int n_ = 0;
  std::vector<int> betti_;
  std::vector<std::vector<std::string>> labels_;
  std::map<std::pair<int, int>, std::vector<Rational>> sc_;
  std::vector<Rational> fundamental_;
};

/// Bilinear product of two classes; degree overflow is rejected.
inline CohomologyClass cup(const RingPresentation& ring, const CohomologyClass& x,
                           const CohomologyClass& y) {
  const int j = x.degree, k = y.degree;
  if (j < 0 || k < 0 || j + k > ring.formal_dim())
    throw std::invalid_argument("cup product degree " + std::to_string(j + k) +
                                " exceeds formal dimension " +
                                std::to_string(ring.formal_dim()));
  if (static_cast<int>(x.coords.size()) != ring.betti(j) ||
      static_cast<int>(y.coords.size()) != ring.betti(k))
    throw std::invalid_argument("class coordinates do not match the Betti numbers");
  CohomologyClass out = ring.zero(j + k);
  for (int a = 0; a < ring.betti(j); ++a) {
    if (x.coords[a] == 0) continue;
    for (int b = 0; b < ring.betti(k); ++b) {
      if (y.coords[b] == 0) continue;
      const Rational w = x.coords[a] * y.coords[b];
      for (int c = 0; c < ring.betti(j + k); ++c) {
        const auto& s = ring.sc(j, k, a, b, c);
        if (s != 0) out.coords[c] += w * s;
      }
    }
  }
  return out;
}

/// Matrix of (x_a, y_b) ↦ fundamental(x_a · y_b) on H^k × H^{n-k}.
inline RationalMatrix duality_pairing(const RingPresentation& ring, int k) {
  const int n = ring.formal_dim();
  RationalMatrix p(ring.betti(k), ring.betti(n - k));
  for (int a = 0; a < ring.betti(k); ++a)
    for (int b = 0; b < ring.betti(n - k); ++b)
      p(a, b) = ring.evaluate(cup(ring, ring.basis(k, a), ring.basis(n - k, b)));
  return p;
}

inline ValidationReport validate(const RingPresentation& ring) {
  const int n = ring.formal_dim();
  auto fail = [](std::string axiom, std::string detail) {
    return ValidationReport{false, std::move(axiom), std::move(detail)};
  };
  auto cls = [&](int k, int a) {
    const auto& l = ring.labels();
    if (k < static_cast<int>(l.size()) && a < static_cast<int>(l[k].size())) return l[k][a];
    return "x" + std::to_string(k) + "_" + std::to_string(a + 1);
  };
  if (n < 1) return fail("shape", "formal dimension must be positive");
  if (ring.betti(0) != 1 || ring.betti(n) != 1)
    return fail("connected-closed-oriented", "b_0 = " + std::to_string(ring.betti(0)) +
                                                 ", b_n = " + std::to_string(ring.betti(n)));
  // Unit.
  for (int k = 0; k <= n; ++k)
    for (int a = 0; a < ring.betti(k); ++a)
      for (int c = 0; c < ring.betti(k); ++c) {
        const Rational want = (a == c) ? 1 : 0;
        if (ring.sc(0, k, 0, a, c) != want || ring.sc(k, 0, a, 0, c) != want)
          return fail("unit", "1 · " + cls(k, a) + " != " + cls(k, a));
      }
  // Graded commutativity.
  for (int j = 0; j <= n; ++j)
    for (int k = 0; j + k <= n; ++k) {
      const int sign = ((j * k) % 2) ? -1 : 1;
      for (int a = 0; a < ring.betti(j); ++a)
        for (int b = 0; b < ring.betti(k); ++b)
          for (int c = 0; c < ring.betti(j + k); ++c)
            if (ring.sc(j, k, a, b, c) != sign * ring.sc(k, j, b, a, c))
              return fail("graded-commutativity", cls(j, a) + " · " + cls(k, b) + " vs " +
                                                      cls(k, b) + " · " + cls(j, a));
    }
  // Associativity over all basis triples of positive degree.
  for (int i = 1; i <= n; ++i)
    for (int j = 1; i + j <= n; ++j)
      for (int k = 1; i + j + k <= n; ++k)
        for (int a = 0; a < ring.betti(i); ++a)
          for (int b = 0; b < ring.betti(j); ++b) {
            const auto ab = cup(ring, ring.basis(i, a), ring.basis(j, b));
            for (int c = 0; c < ring.betti(k); ++c) {
              const auto z = ring.basis(k, c);
              const auto bc = cup(ring, ring.basis(j, b), z);
              if (cup(ring, ab, z) != cup(ring, ring.basis(i, a), bc))
                return fail("associativity",
                            "(" + cls(i, a) + " · " + cls(j, b) + ") · " + cls(k, c));
            }
          }
  // Poincaré duality.
  for (int k = 0; k <= n; ++k) {
    if (ring.betti(k) != ring.betti(n - k))
      return fail("poincare-duality", "b_" + std::to_string(k) + " != b_" + std::to_string(n - k));
    const auto r = rank(duality_pairing(ring, k));
    if (static_cast<int>(r) != ring.betti(k))
      return fail("poincare-duality", "pairing H^" + std::to_string(k) + " x H^" +
                                          std::to_string(n - k) + " has rank " +
                                          std::to_string(r) + " < " +
                                          std::to_string(ring.betti(k)));
  }
  return {};
}

namespace detail {

inline RingPresentation checked(RingPresentation ring) {
  auto report = validate(ring);
  if (!report.valid)
    throw std::logic_error("ring presentation fails " + report.axiom + ": " + report.detail);
  return ring;
}

inline std::string torus_label(Blade b) {
  if (b.degree() == 0) return "1";
  std::string s;
  for (int i : b.indices()) s += (s.empty() ? "t" : "^t") + std::to_string(i);
  return s;
}

}  // namespace detail

inline RingPresentation build_sphere(int n) {
  if (n < 2) throw std::invalid_argument("sphere dimension must be at least 2");
  std::vector<int> betti(n + 1, 0);
  betti[0] = betti[n] = 1;
  RingPresentation ring(n, betti);
  ring.labels()[0] = {"1"};
  ring.labels()[n] = {"vol"};
  ring.set_unit_products();
  ring.fundamental() = {Rational(1)};
  return detail::checked(std::move(ring));
}

/// Full exterior algebra on n degree-one generators t1..tn.
inline RingPresentation build_torus(int n) {
  if (n < 2) throw std::invalid_argument("torus dimension must be at least 2");
  std::vector<int> betti(n + 1);
  for (int k = 0; k <= n; ++k) betti[k] = static_cast<int>(binomial(n, k));
  RingPresentation ring(n, betti);
  std::vector<std::vector<Blade>> blades(n + 1);
  for (int k = 0; k <= n; ++k) {
    blades[k] = basis_blades(n, k);
    ring.labels()[k].clear();
    for (auto b : blades[k]) ring.labels()[k].push_back(detail::torus_label(b));
  }
  for (int j = 0; j <= n; ++j)
    for (int k = 0; j + k <= n; ++k)
      for (int a = 0; a < betti[j]; ++a)
        for (int b = 0; b < betti[k]; ++b) {
          const Blade x = blades[j][a], y = blades[k][b];
          if (x.mask() & y.mask()) continue;
          const int c = blade_rank(Blade(x.mask() | y.mask()), n);
          ring.sc(j, k, a, b, c) = wedge_sign(x, y);
        }
  ring.fundamental() = {Rational(1)};
  return detail::checked(std::move(ring));
}

namespace detail {

/// Simply connected 4-dimensional ring with H² intersection matrix q.
inline RingPresentation four_manifold_ring(const IntMatrix& q, std::vector<std::string> labels) {
  const int b2 = static_cast<int>(q.size());
  RingPresentation ring(4, {1, 0, b2, 0, 1});
  ring.labels()[0] = {"1"};
  ring.labels()[2] = std::move(labels);
  ring.labels()[4] = {"vol"};
  ring.set_unit_products();
  for (int a = 0; a < b2; ++a)
    for (int b = 0; b < b2; ++b) ring.sc(2, 2, a, b, 0) = q[a][b];
  ring.fundamental() = {Rational(1)};
  return checked(std::move(ring));
}

}  // namespace detail

inline RingPresentation build_cp2() { return detail::four_manifold_ring({{1}}, {"c"}); }
inline RingPresentation build_cp2bar() { return detail::four_manifold_ring({{-1}}, {"c"}); }
inline RingPresentation build_s2xs2() {
  return detail::four_manifold_ring({{0, 1}, {1, 0}}, {"a", "b"});
}

/// Ring of a simply connected 4-manifold with the given intersection matrix.
inline RingPresentation build_from_form(const IntMatrix& q) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < q.size(); ++i) labels.push_back("u" + std::to_string(i + 1));
  return detail::four_manifold_ring(q, std::move(labels));
}

/// Cohomology of a connected sum: positive degrees below n add as a direct sum,
/// cross products of positive-degree classes vanish, degrees 0 and n are
/// identified. The top class of the result has fundamental value 1; products
/// landing in the top degree are rescaled so that every pairing is preserved.
inline RingPresentation connected_sum(const RingPresentation& a, const RingPresentation& b) {
  const int n = a.formal_dim();
  if (b.formal_dim() != n)
    throw std::invalid_argument("connected sum of rings of different dimension");
  for (const auto* r : {&a, &b}) {
    auto v = validate(*r);
    if (!v.valid) throw std::invalid_argument("connected sum operand invalid: " + v.axiom);
  }
  std::vector<int> betti(n + 1);
  betti[0] = betti[n] = 1;
  for (int k = 1; k < n; ++k) betti[k] = a.betti(k) + b.betti(k);
  RingPresentation out(n, betti);
  out.labels()[0] = a.labels()[0];
  out.labels()[n] = a.labels()[n];
  for (int k = 1; k < n; ++k) {
    std::set<std::string> seen;
    out.labels()[k].clear();
    for (const auto* r : {&a, &b})
      for (const auto& l : r->labels()[k]) {
        std::string name = l;
        for (int s = 2; seen.count(name); ++s) name = l + "_" + std::to_string(s);
        seen.insert(name);
        out.labels()[k].push_back(name);
      }
  }
  out.set_unit_products();
  out.fundamental() = {Rational(1)};

  // Copy each summand's products among positive-degree classes.
  for (int part = 0; part < 2; ++part) {
    const RingPresentation& src = part == 0 ? a : b;
    auto shift = [&](int k) { return (part == 0 || k == 0 || k == n) ? 0 : a.betti(k); };
    for (int j = 1; j < n; ++j)
      for (int k = 1; j + k <= n; ++k)
        for (int x = 0; x < src.betti(j); ++x)
          for (int y = 0; y < src.betti(k); ++y)
            for (int c = 0; c < src.betti(j + k); ++c) {
              Rational s = src.sc(j, k, x, y, c);
              if (s == 0) continue;
              if (j + k == n) s *= src.fundamental()[c];
              out.sc(j, k, x + shift(j), y + shift(k), c + shift(j + k)) += s;
            }
  }
  auto report = validate(out);
  if (!report.valid)
    throw std::logic_error("connected sum breaks " + report.axiom + ": " + report.detail);
  return out;
}

/// Rational Gram matrix fundamental(x_a · x_b) on the middle degree n/2.
inline RationalMatrix middle_pairing(const RingPresentation& ring) {
  const int n = ring.formal_dim();
  if (n % 2 != 0) throw std::invalid_argument("middle pairing needs even formal dimension");
  return duality_pairing(ring, n / 2);
}

/// Integral intersection form of a ring of dimension 4m.
inline IntersectionForm intersection_form(const RingPresentation& ring) {
  if (ring.formal_dim() % 4 != 0)
    throw std::invalid_argument("intersection form needs formal dimension divisible by 4");
  const auto g = middle_pairing(ring);
  if (!g.is_symmetric()) throw std::logic_error("middle pairing is not symmetric");
  IntMatrix m(g.rows(), std::vector<std::int64_t>(g.cols()));
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) {
      if (denominator(g(i, j)) != 1)
        throw std::invalid_argument("middle pairing is not integral in this basis");
      m[i][j] = to_int64(numerator(g(i, j)));
    }
  return IntersectionForm(std::move(m));
}

}  // namespace qre
