// Copyright Contributors to the qre-toolkit Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qre/intersection_form.hpp"

namespace qre {

/// Homeomorphism type of a smooth closed simply connected oriented 4-manifold
/// with β± <= 3, as determined by its intersection form.
struct HomeoType {
  enum class Kind { Sphere4, SumS2xS2, SumCP2, OutsideSupportedRegime };

  Kind kind = Kind::Sphere4;
  int k = 0;  // copies of S²×S²
  int j = 0;  // copies of CP²
  int i = 0;  // copies of CP²bar
  std::string reason;

  static HomeoType sphere() { return {}; }
  static HomeoType sum_s2xs2(int k) {
    if (k < 0) throw std::invalid_argument("negative connected-sum count");
    return k == 0 ? sphere() : HomeoType{Kind::SumS2xS2, k, 0, 0, {}};
  }
  static HomeoType sum_cp2(int j, int i) {
    if (j < 0 || i < 0) throw std::invalid_argument("negative connected-sum count");
    return (j == 0 && i == 0) ? sphere() : HomeoType{Kind::SumCP2, 0, j, i, {}};
  }
  static HomeoType outside(std::string why) {
    return {Kind::OutsideSupportedRegime, 0, 0, 0, std::move(why)};
  }

  std::string name() const {
    switch (kind) {
      case Kind::Sphere4: return "S^4";
      case Kind::SumS2xS2:
        return k == 1 ? "S^2 x S^2" : "#^" + std::to_string(k) + " S^2 x S^2";
      case Kind::SumCP2: {
        std::string s;
        if (j == 1) s = "CP^2";
        else if (j > 1) s = "#^" + std::to_string(j) + " CP^2";
        if (i > 0) {
          const std::string bar = "CP^2bar";
          if (i == 1) s += s.empty() ? bar : " # " + bar;
          else s += (s.empty() ? "#^" : " #^") + std::to_string(i) + " " + bar;
        }
        return s;
      }
      case Kind::OutsideSupportedRegime: return "outside supported regime (" + reason + ")";
    }
    return "?";
  }

  friend bool operator==(const HomeoType&, const HomeoType&) = default;
};

/// Raised for forms that cannot be intersection forms inside the regime.
class ClassificationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr int kMaxDefinite = 3;

inline IntersectionForm analyze_form(const IntMatrix& m) { return IntersectionForm(m); }

/// Homeomorphism type from the rank, signature and parity of the form.
/// Inside β± <= 3 no E₈ summand fits, so odd forms are diagonal ⟨1⟩^p ⊕ ⟨-1⟩^q
/// and even forms are sums of hyperbolic planes.
inline HomeoType classify_simply_connected(const IntersectionForm& form) {
  const int p = form.beta_plus(), q = form.beta_minus();
  if (form.rank() == 0) return HomeoType::sphere();
  if (p > kMaxDefinite || q > kMaxDefinite)
    return HomeoType::outside("beta+ = " + std::to_string(p) + ", beta- = " + std::to_string(q));
  if (!form.is_even()) return HomeoType::sum_cp2(p, q);
  if (p != q)
    throw ClassificationError("even unimodular form with beta+ = " + std::to_string(p) +
                              " != beta- = " + std::to_string(q) +
                              " cannot have |signature| < 8");
  return HomeoType::sum_s2xs2(p);
}

struct EllipticityDecision {
  bool elliptic = false;
  std::optional<HomeoType> homeo;
};

/// A closed simply connected 4-manifold is quasiregularly elliptic exactly
/// when both definite Betti numbers are at most three.
inline EllipticityDecision qre_ellipticity_decision(const IntersectionForm& form) {
  EllipticityDecision d;
  d.elliptic = form.beta_plus() <= kMaxDefinite && form.beta_minus() <= kMaxDefinite;
  if (d.elliptic) d.homeo = classify_simply_connected(form);
  return d;
}

/// cells[β⁻][β⁺]: odd representative first, then the even one where it exists.
using ClassificationTable = std::array<std::array<std::vector<HomeoType>, 4>, 4>;

inline ClassificationTable generate_table() {
  ClassificationTable t;
  for (int minus = 0; minus <= kMaxDefinite; ++minus)
    for (int plus = 0; plus <= kMaxDefinite; ++plus) {
      auto& cell = t[minus][plus];
      cell.push_back(HomeoType::sum_cp2(plus, minus));
      if (plus == minus && plus > 0) cell.push_back(HomeoType::sum_s2xs2(plus));
    }
  return t;
}

/// Cell lookup addressed as (β⁺, β⁻).
inline const std::vector<HomeoType>& table_cell(const ClassificationTable& t, int plus, int minus) {
  if (plus < 0 || plus > kMaxDefinite || minus < 0 || minus > kMaxDefinite)
    throw std::out_of_range("table cell out of range");
  return t[minus][plus];
}

/// Aligned plain-text rendering; rows are β⁻, columns β⁺.
inline std::string render_table(const ClassificationTable& t) {
  std::array<std::size_t, 5> width{};
  width[0] = std::string("b- \\ b+").size();
  for (int plus = 0; plus <= kMaxDefinite; ++plus) {
    width[plus + 1] = 1;
    for (int minus = 0; minus <= kMaxDefinite; ++minus)
      for (std::size_t e = 0; e < t[minus][plus].size(); ++e) {
        std::string s = t[minus][plus][e].name() + (e + 1 < t[minus][plus].size() ? "," : "");
        width[plus + 1] = std::max(width[plus + 1], s.size());
      }
  }
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(w, s.size()), ' ');
    return s;
  };
  std::string rule = "+";
  for (auto w : width) rule += std::string(w + 2, '-') + "+";
  rule += "\n";
  std::string out = rule + "| " + pad("b- \\ b+", width[0]) + " |";
  for (int plus = 0; plus <= kMaxDefinite; ++plus)
    out += " " + pad(std::to_string(plus), width[plus + 1]) + " |";
  out += "\n" + rule;
  for (int minus = 0; minus <= kMaxDefinite; ++minus) {
    std::size_t lines = 0;
    for (int plus = 0; plus <= kMaxDefinite; ++plus)
      lines = std::max(lines, t[minus][plus].size());
    for (std::size_t line = 0; line < lines; ++line) {
      out += "| " + pad(line == 0 ? std::to_string(minus) : "", width[0]) + " |";
      for (int plus = 0; plus <= kMaxDefinite; ++plus) {
        const auto& cell = t[minus][plus];
        std::string s;
        if (line < cell.size()) s = cell[line].name() + (line + 1 < cell.size() ? "," : "");
        out += " " + pad(s, width[plus + 1]) + " |";
      }
      out += "\n";
    }
    out += rule;
  }
  return out;
}

}  // namespace qre
