// Copyright Contributors to the qre-toolkit Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qre/linalg.hpp"
#include "qre/scalar.hpp"

namespace qre {

/// A basis element e_{i1...ik} of the exterior algebra, stored as a bit set
/// over 0-based indices. Public accessors speak 1-based indices.
class Blade {
 public:
  static constexpr int kMaxDim = 32;

  constexpr Blade() = default;
  constexpr explicit Blade(std::uint32_t mask) : mask_(mask) {}

  /// Builds from a strictly increasing list of 1-based indices.
  static Blade from_indices(const std::vector<int>& idx, int n) {
    std::uint32_t m = 0;
    int prev = 0;
    for (int i : idx) {
      if (i <= prev || i > n)
        throw std::invalid_argument("blade indices must be strictly increasing within 1.." +
                                    std::to_string(n));
      m |= 1u << (i - 1);
      prev = i;
    }
    return Blade(m);
  }

  constexpr std::uint32_t mask() const { return mask_; }
  constexpr int degree() const { return std::popcount(mask_); }

  std::vector<int> indices() const {
    std::vector<int> out;
    for (std::uint32_t m = mask_; m; m &= m - 1) out.push_back(std::countr_zero(m) + 1);
    return out;
  }

  friend constexpr bool operator==(Blade, Blade) = default;

 private:
  std::uint32_t mask_ = 0;
};

/// Lexicographic order on the increasing index tuples, shorter prefix first:
/// () < (1) < (1,2) < (1,2,3) < (1,3) < (2) < ...
struct LexOrder {
  constexpr bool operator()(Blade a, Blade b) const {
    std::uint32_t x = a.mask(), y = b.mask();
    while (x && y) {
      int i = std::countr_zero(x), j = std::countr_zero(y);
      if (i != j) return i < j;
      x &= x - 1;
      y &= y - 1;
    }
    return !x && y;
  }
};

/// Sign of e_a ∧ e_b for disjoint blades: (-1)^(inversions between a and b).
constexpr int wedge_sign(Blade a, Blade b) {
  int inversions = 0;
  for (std::uint32_t m = b.mask(); m; m &= m - 1) {
    int i = std::countr_zero(m);
    inversions += std::popcount(a.mask() >> (i + 1));
  }
  return (inversions & 1) ? -1 : 1;
}

/// All degree-k blades of ⋀ℝⁿ in lexicographic order.
inline std::vector<Blade> basis_blades(int n, int k) {
  std::vector<Blade> out;
  if (k < 0 || k > n) return out;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i + 1;
  while (true) {
    out.push_back(Blade::from_indices(idx, n));
    int pos = k - 1;
    while (pos >= 0 && idx[pos] == n - k + pos + 1) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int i = pos + 1; i < k; ++i) idx[i] = idx[i - 1] + 1;
  }
  return out;
}

/// Position of a blade within basis_blades(n, degree).
inline int blade_rank(Blade b, int n) {
  // Combinatorial number system in lexicographic order.
  auto idx = b.indices();
  const int k = static_cast<int>(idx.size());
  std::int64_t r = 0;
  int prev = 0;
  for (int p = 0; p < k; ++p) {
    for (int v = prev + 1; v < idx[p]; ++v) r += binomial(n - v, k - p - 1);
    prev = idx[p];
  }
  return static_cast<int>(r);
}

/// Element of ⋀*ℝⁿ with coefficients in Scalar (Rational or double).
/// Zero coefficients are never stored.
template <class Scalar>
class Multivector {
 public:
  using Terms = std::map<Blade, Scalar, LexOrder>;

  explicit Multivector(int n) : n_(n) {
    if (n < 1 || n > Blade::kMaxDim)
      throw std::invalid_argument("ambient dimension must lie in 1.." +
                                  std::to_string(Blade::kMaxDim));
  }

  static Multivector scalar(int n, Scalar s) {
    Multivector m(n);
    m.add_term(Blade{}, std::move(s));
    return m;
  }

  static Multivector basis(int n, std::initializer_list<int> idx, Scalar s = Scalar(1)) {
    return basis(n, std::vector<int>(idx), std::move(s));
  }

  static Multivector basis(int n, const std::vector<int>& idx, Scalar s = Scalar(1)) {
    Multivector m(n);
    m.add_term(Blade::from_indices(idx, n), std::move(s));
    return m;
  }

  int ambient_dim() const { return n_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  Scalar coefficient(Blade b) const {
    auto it = terms_.find(b);
    return it == terms_.end() ? Scalar(0) : it->second;
  }

  void add_term(Blade b, const Scalar& s) {
    if (n_ < Blade::kMaxDim && (b.mask() >> n_) != 0)
      throw std::invalid_argument("blade index exceeds ambient dimension");
    if (qre::is_zero(s)) return;
    auto [it, inserted] = terms_.try_emplace(b, s);
    if (!inserted) {
      it->second += s;
      if (qre::is_zero(it->second)) terms_.erase(it);
    }
  }

  /// Degree if every stored term has the same degree; -1 otherwise (and for 0).
  int pure_degree() const {
    int d = -1;
    for (const auto& [b, s] : terms_) {
      if (d == -1) d = b.degree();
      else if (d != b.degree()) return -1;
    }
    return d;
  }

  Multivector component(int k) const {
    Multivector out(n_);
    for (const auto& [b, s] : terms_)
      if (b.degree() == k) out.terms_.emplace(b, s);
    return out;
  }

  Multivector& operator+=(const Multivector& o) {
    require_same_dim(o);
    for (const auto& [b, s] : o.terms_) add_term(b, s);
    return *this;
  }
  Multivector& operator-=(const Multivector& o) {
    require_same_dim(o);
    for (const auto& [b, s] : o.terms_) add_term(b, -s);
    return *this;
  }
  Multivector& operator*=(const Scalar& c) {
    if (qre::is_zero(c)) {
      terms_.clear();
      return *this;
    }
    for (auto& [b, s] : terms_) s *= c;
    return *this;
  }

  friend Multivector operator+(Multivector a, const Multivector& b) { return a += b; }
  friend Multivector operator-(Multivector a, const Multivector& b) { return a -= b; }
  friend Multivector operator*(const Scalar& c, Multivector a) { return a *= c; }
  friend Multivector operator*(Multivector a, const Scalar& c) { return a *= c; }
  friend bool operator==(const Multivector& a, const Multivector& b) {
    return a.n_ == b.n_ && a.terms_ == b.terms_;
  }

  void require_same_dim(const Multivector& o) const {
    if (o.n_ != n_)
      throw std::invalid_argument("ambient dimension mismatch: " + std::to_string(n_) +
                                  " vs " + std::to_string(o.n_));
  }

 private:
  int n_;
  Terms terms_;
};

using ExactMultivector = Multivector<Rational>;
using NumericMultivector = Multivector<double>;

template <class Scalar>
Multivector<Scalar> wedge(const Multivector<Scalar>& a, const Multivector<Scalar>& b) {
  a.require_same_dim(b);
  Multivector<Scalar> out(a.ambient_dim());
  for (const auto& [ba, sa] : a.terms()) {
    for (const auto& [bb, sb] : b.terms()) {
      if (ba.mask() & bb.mask()) continue;
      Scalar c = sa * sb;
      if (wedge_sign(ba, bb) < 0) c = -c;
      out.add_term(Blade(ba.mask() | bb.mask()), c);
    }
  }
  return out;
}

/// Coefficient of e_{1..n} in a ∧ b, for a of pure degree k and b of pure
/// degree n-k. The zero multivector counts as having any degree.
template <class Scalar>
Scalar top_pairing(const Multivector<Scalar>& a, const Multivector<Scalar>& b) {
  a.require_same_dim(b);
  const int n = a.ambient_dim();
  const int da = a.pure_degree(), db = b.pure_degree();
  if ((!a.is_zero() && da < 0) || (!b.is_zero() && db < 0))
    throw std::invalid_argument("top_pairing requires pure-degree arguments");
  if (!a.is_zero() && !b.is_zero() && da + db != n)
    throw std::invalid_argument("top_pairing requires complementary degrees");
  const Blade top((n == 32) ? ~0u : ((1u << n) - 1u));
  return wedge(a, b).coefficient(top);
}

/// Explicit exact -> numeric conversion.
inline NumericMultivector to_numeric(const ExactMultivector& m) {
  NumericMultivector out(m.ambient_dim());
  for (const auto& [b, s] : m.terms()) out.add_term(b, to_double(s));
  return out;
}

/// Gram matrix of the pairing (ω, τ) ↦ top coefficient of ω ∧ τ on ⋀ᵏℝⁿ
/// with n = 2k, in the lexicographic basis.
struct PairingMatrix {
  int n = 0;
  int k = 0;
  std::vector<std::vector<int>> gram;
};

inline PairingMatrix pairing_matrix(int n, int k) {
  if (n != 2 * k) throw std::invalid_argument("pairing matrix requires n = 2k");
  const auto basis = basis_blades(n, k);
  const std::size_t m = basis.size();
  PairingMatrix pm{n, k, std::vector<std::vector<int>>(m, std::vector<int>(m, 0))};
  const std::uint32_t full = (n == 32) ? ~0u : ((1u << n) - 1u);
  for (std::size_t i = 0; i < m; ++i) {
    Blade comp(full & ~basis[i].mask());
    std::size_t j = static_cast<std::size_t>(blade_rank(comp, n));
    pm.gram[i][j] = wedge_sign(basis[i], comp);
  }
  return pm;
}

struct Signature {
  int positive = 0;
  int negative = 0;
  int zero = 0;
  friend bool operator==(const Signature&, const Signature&) = default;
};

/// Signature (p, q) of the middle pairing on ⋀ᵏℝⁿ, n = 2k, k even.
inline Signature pairing_signature(int n, int k) {
  if (n != 2 * k) throw std::invalid_argument("pairing_signature requires n = 2k");
  if (k % 2 != 0)
    throw std::invalid_argument("pairing on odd degree is antisymmetric; signature undefined");
  const auto pm = pairing_matrix(n, k);
  RationalMatrix g(pm.gram.size(), pm.gram.size());
  for (std::size_t i = 0; i < pm.gram.size(); ++i)
    for (std::size_t j = 0; j < pm.gram.size(); ++j) g(i, j) = pm.gram[i][j];
  auto inertia = symmetric_inertia(g);
  return {inertia.positive, inertia.negative, inertia.zero};
}

/// Largest dimension of a subspace on which the middle pairing is definite.
inline int max_definite_dimension(int n, int k) {
  auto s = pairing_signature(n, k);
  return std::max(s.positive, s.negative);
}

}  // namespace qre
