// Copyright Contributors to the qre-toolkit Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "qre/cohomology_ring.hpp"
#include "qre/exterior_algebra.hpp"
#include "qre/linalg.hpp"
#include "qre/parallel.hpp"

namespace qre {

// ---------------------------------------------------------------------------
// Exact necessary conditions for a graded-algebra embedding H* -> ⋀*ℝⁿ.
// ---------------------------------------------------------------------------

struct BettiCertificate {
  int degree = 0;
  int betti = 0;
  std::int64_t bound = 0;
};

/// A nonzero element of ⋀ᵏ(H¹) killed by the iterated cup product.
struct ExteriorPowerCertificate {
  int degree = 0;
  std::size_t rank = 0;
  std::vector<std::vector<int>> subsets;  // 0-based H¹ indices, lexicographic
  std::vector<Rational> kernel_vector;    // coefficients over `subsets`
};

struct DefinitenessCertificate {
  int positive = 0;
  int negative = 0;
  std::int64_t bound = 0;
  std::vector<Rational> diagonal;  // congruent diagonal form of the middle pairing
};

using Certificate =
    std::variant<std::monostate, BettiCertificate, ExteriorPowerCertificate, DefinitenessCertificate>;

struct CheckResult {
  std::string name;
  bool applicable = true;
  bool passed = true;
  /// Set for conditions derived as consequences rather than taken as stated results.
  bool derived = false;
  std::string summary;
  Certificate certificate;
};

inline CheckResult check_betti_bounds(const RingPresentation& ring) {
  const int n = ring.formal_dim();
  CheckResult r{"check_betti_bounds"};
  int tight = 0;
  for (int k = 0; k <= n; ++k) {
    const auto bound = binomial(n, k);
    if (ring.betti(k) == bound) ++tight;
    if (ring.betti(k) > bound && r.passed) {
      r.passed = false;
      r.certificate = BettiCertificate{k, ring.betti(k), bound};
      r.summary = "b_" + std::to_string(k) + " = " + std::to_string(ring.betti(k)) + " > C(" +
                  std::to_string(n) + "," + std::to_string(k) + ") = " + std::to_string(bound);
    }
  }
  if (r.passed)
    r.summary = "b_k <= C(n,k) for all k (" + std::to_string(tight) + " of " +
                std::to_string(n + 1) + " tight)";
  return r;
}

namespace detail {

inline std::vector<std::vector<int>> subsets(int m, int k) {
  std::vector<std::vector<int>> out;
  for (auto b : basis_blades(m, k)) {
    auto idx = b.indices();
    for (auto& i : idx) --i;
    out.push_back(std::move(idx));
  }
  return out;
}

}  // namespace detail

/// Matrix of ⋀ᵏ(H¹) -> Hᵏ, columns indexed by k-subsets of the H¹ basis.
inline RationalMatrix exterior_power_map(const RingPresentation& ring, int k) {
  const int b1 = ring.betti(1);
  const auto subs = detail::subsets(b1, k);
  RationalMatrix m(ring.betti(k), subs.size());
  for (std::size_t s = 0; s < subs.size(); ++s) {
    CohomologyClass prod = ring.unit();
    for (int i : subs[s]) prod = cup(ring, prod, ring.basis(1, i));
    for (int c = 0; c < ring.betti(k); ++c) m(c, s) = prod.coords[c];
  }
  return m;
}

/// Injectivity of ⋀ᵏ(H¹) -> Hᵏ for 2 <= k <= min(n, b₁). Any embedding is
/// injective on H¹, and exterior powers of injective linear maps are
/// injective, so a kernel obstructs embeddings.
inline CheckResult check_exterior_power_h1(const RingPresentation& ring) {
  const int n = ring.formal_dim();
  const int b1 = ring.betti(1);
  CheckResult r{"check_exterior_power_h1"};
  r.derived = true;
  const int kmax = std::min(n, b1);
  for (int k = 2; k <= kmax; ++k) {
    auto m = exterior_power_map(ring, k);
    const auto rk = qre::rank(m);
    if (rk < m.cols()) {
      auto ker = kernel(m);
      r.passed = false;
      r.certificate = ExteriorPowerCertificate{k, rk, detail::subsets(b1, k), ker.front()};
      r.summary = "wedge^" + std::to_string(k) + " H^1 -> H^" + std::to_string(k) +
                  " has rank " + std::to_string(rk) + " < " + std::to_string(m.cols());
      return r;
    }
  }
  r.summary = kmax < 2 ? "nothing to check (b_1 < 2)"
                       : "wedge^k H^1 -> H^k injective for 2 <= k <= " + std::to_string(kmax);
  return r;
}

/// β^± of the middle pairing against ½·C(4m, 2m).
inline CheckResult check_definiteness_bounds(const RingPresentation& ring) {
  const int n = ring.formal_dim();
  CheckResult r{"check_definiteness_bounds"};
  if (n % 4 != 0) {
    r.applicable = false;
    r.summary = "not applicable (n not divisible by 4)";
    return r;
  }
  const auto bound = binomial(n, n / 2) / 2;
  auto inertia = symmetric_inertia(middle_pairing(ring));
  r.certificate = DefinitenessCertificate{inertia.positive, inertia.negative, bound,
                                          inertia.diagonal};
  r.passed = inertia.positive <= bound && inertia.negative <= bound;
  r.summary = "beta+ = " + std::to_string(inertia.positive) + ", beta- = " +
              std::to_string(inertia.negative) + ", bound " + std::to_string(bound);
  return r;
}

/// Re-checks a failing certificate from scratch without trusting the check
/// that produced it.
inline bool verify_certificate(const RingPresentation& ring, const CheckResult& check) {
  if (check.passed) return false;
  if (auto* c = std::get_if<BettiCertificate>(&check.certificate))
    return ring.betti(c->degree) == c->betti && c->betti > binomial(ring.formal_dim(), c->degree);
  if (auto* c = std::get_if<ExteriorPowerCertificate>(&check.certificate)) {
    bool nonzero = false;
    CohomologyClass sum = ring.zero(c->degree);
    for (std::size_t s = 0; s < c->subsets.size(); ++s) {
      if (c->kernel_vector[s] == 0) continue;
      nonzero = true;
      CohomologyClass prod = ring.unit();
      for (int i : c->subsets[s]) prod = cup(ring, prod, ring.basis(1, i));
      for (std::size_t q = 0; q < sum.coords.size(); ++q)
        sum.coords[q] += c->kernel_vector[s] * prod.coords[q];
    }
    return nonzero && sum.is_zero();
  }
  if (auto* c = std::get_if<DefinitenessCertificate>(&check.certificate)) {
    // Cross-check with eigenvalues of the middle pairing in floating point.
    const auto g = middle_pairing(ring);
    Eigen::MatrixXd m(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) m(i, j) = to_double(g(i, j));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    int p = 0, q = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      if (es.eigenvalues()[i] > 1e-9) ++p;
      else if (es.eigenvalues()[i] < -1e-9) ++q;
    }
    return p == c->positive && q == c->negative && (p > c->bound || q > c->bound);
  }
  return false;
}

// ---------------------------------------------------------------------------
// Numerical search for an embedding.
// ---------------------------------------------------------------------------

struct SearchConfig {
  int restarts = 64;
  int max_iters = 400;
  double tol_residual = 1e-8;
  double tol_injectivity = 1e-6;
  std::uint64_t seed = 0;

  void validate() const {
    if (restarts <= 0) throw std::invalid_argument("search config: restarts must be positive");
    if (max_iters <= 0) throw std::invalid_argument("search config: max_iters must be positive");
    if (!(tol_residual > 0)) throw std::invalid_argument("search config: tol_residual must be > 0");
    if (!(tol_injectivity > 0))
      throw std::invalid_argument("search config: tol_injectivity must be > 0");
  }
};

struct EmbeddingWitness {
  /// images[k][a] is the image of basis class a of degree k.
  std::vector<std::vector<NumericMultivector>> images;
  double residual = 0.0;
  /// Smallest singular value of the degree-k image matrix, k = 0..n.
  std::vector<double> injectivity_margins;
};

struct SearchStats {
  int restarts_run = 0;
  int best_restart = -1;
  double best_residual = std::numeric_limits<double>::infinity();
  std::vector<double> best_margins;
};

struct SearchOutcome {
  std::optional<EmbeddingWitness> witness;
  SearchStats stats;
};

/// Least-squares formulation of the homomorphism equations
/// Φ(x)∧Φ(y) = Φ(x·y) over all pairs of positive-degree basis classes.
/// The top class is pinned to e_{1..n}; by Poincaré duality a homomorphism
/// with nonzero top image is injective, and any embedding can be brought to
/// this normal form by a linear change of coordinates on ℝⁿ.
class EmbeddingProblem {
 public:
  explicit EmbeddingProblem(const RingPresentation& ring) : n_(ring.formal_dim()) {
    if (n_ > 12) throw std::invalid_argument("embedding search supports n <= 12");
    blades_.resize(n_ + 1);
    for (int k = 0; k <= n_; ++k) blades_[k] = basis_blades(n_, k);
    offset_.assign(n_ + 1, std::vector<int>());
    for (int k = 1; k < n_; ++k)
      for (int a = 0; a < ring.betti(k); ++a) {
        offset_[k].push_back(num_params_);
        num_params_ += static_cast<int>(blades_[k].size());
      }
    betti_ = ring.betti();
    // Pairs of positive-degree classes, each unordered pair once.
    for (int j = 1; j < n_; ++j)
      for (int k = j; j + k <= n_; ++k)
        for (int a = 0; a < ring.betti(j); ++a)
          for (int b = (j == k ? a : 0); b < ring.betti(k); ++b) {
            Relation rel{j, a, k, b, {}};
            for (int c = 0; c < ring.betti(j + k); ++c) {
              const Rational s = ring.sc(j, k, a, b, c);
              if (s != 0) rel.product.push_back({c, to_double(s)});
            }
            relations_.push_back(std::move(rel));
            num_residuals_ += static_cast<int>(blades_[j + k].size());
          }
    // Wedge tables for each degree pair.
    tables_.assign(n_ + 1, std::vector<std::vector<WedgeEntry>>(n_ + 1));
    for (int j = 1; j < n_; ++j)
      for (int k = 1; j + k <= n_; ++k)
        for (std::size_t p = 0; p < blades_[j].size(); ++p)
          for (std::size_t q = 0; q < blades_[k].size(); ++q) {
            Blade x = blades_[j][p], y = blades_[k][q];
            if (x.mask() & y.mask()) continue;
            tables_[j][k].push_back({static_cast<int>(p), static_cast<int>(q),
                                     blade_rank(Blade(x.mask() | y.mask()), n_),
                                     static_cast<double>(wedge_sign(x, y))});
          }
  }

  int num_params() const { return num_params_; }
  int num_residuals() const { return num_residuals_; }
  int formal_dim() const { return n_; }

  /// Residual vector and (optionally) its Jacobian.
  void evaluate(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const {
    r.setZero(num_residuals_);
    if (jac) jac->setZero(num_residuals_, num_params_);
    int row = 0;
    for (const auto& rel : relations_) {
      const int d = rel.j + rel.k;
      const int ox = offset_[rel.j][rel.a], oy = offset_[rel.k][rel.b];
      for (const auto& w : tables_[rel.j][rel.k]) {
        r[row + w.out] += w.sign * p[ox + w.p] * p[oy + w.q];
        if (jac) {
          (*jac)(row + w.out, ox + w.p) += w.sign * p[oy + w.q];
          (*jac)(row + w.out, oy + w.q) += w.sign * p[ox + w.p];
        }
      }
      for (const auto& [c, s] : rel.product) {
        if (d == n_) {
          r[row] -= s;  // Φ(top) = e_{1..n}
        } else {
          const int oc = offset_[d][c];
          for (std::size_t i = 0; i < blades_[d].size(); ++i) {
            r[row + static_cast<int>(i)] -= s * p[oc + static_cast<int>(i)];
            if (jac) (*jac)(row + static_cast<int>(i), oc + static_cast<int>(i)) -= s;
          }
        }
      }
      row += static_cast<int>(blades_[d].size());
    }
  }

  double objective(const Eigen::VectorXd& p) const {
    Eigen::VectorXd r;
    evaluate(p, r, nullptr);
    return r.squaredNorm();
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& p) const {
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    evaluate(p, r, &jac);
    return 2.0 * jac.transpose() * r;
  }

  /// Images of all basis classes for a parameter vector.
  std::vector<std::vector<NumericMultivector>> images(const Eigen::VectorXd& p) const {
    std::vector<std::vector<NumericMultivector>> out(n_ + 1);
    out[0].push_back(NumericMultivector::scalar(n_, 1.0));
    for (int k = 1; k < n_; ++k)
      for (int a = 0; a < betti_[k]; ++a) {
        NumericMultivector m(n_);
        for (std::size_t i = 0; i < blades_[k].size(); ++i)
          m.add_term(blades_[k][i], p[offset_[k][a] + static_cast<int>(i)]);
        out[k].push_back(std::move(m));
      }
    out[n_].push_back(NumericMultivector::basis(n_, blades_[n_].front().indices(), 1.0));
    return out;
  }

  /// σ_{b_k} of the C(n,k) × b_k image matrix; 0 when b_k > C(n,k).
  std::vector<double> injectivity_margins(const Eigen::VectorXd& p) const {
    std::vector<double> out(n_ + 1, 1.0);
    for (int k = 1; k < n_; ++k) {
      const int rows = static_cast<int>(blades_[k].size());
      const int cols = betti_[k];
      if (cols == 0) continue;
      if (cols > rows) {
        out[k] = 0.0;
        continue;
      }
      Eigen::MatrixXd m(rows, cols);
      for (int a = 0; a < cols; ++a) m.col(a) = p.segment(offset_[k][a], rows);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
      out[k] = svd.singularValues()[cols - 1];
    }
    return out;
  }

 private:
  struct Relation {
    int j, a, k, b;
    std::vector<std::pair<int, double>> product;
  };
  struct WedgeEntry {
    int p, q, out;
    double sign;
  };

  int n_;
  std::vector<int> betti_;
  std::vector<std::vector<Blade>> blades_;
  std::vector<std::vector<int>> offset_;
  std::vector<Relation> relations_;
  std::vector<std::vector<std::vector<WedgeEntry>>> tables_;
  int num_params_ = 0;
  int num_residuals_ = 0;
};

/// Σ‖Φ(x)∧Φ(y) − Φ(x·y)‖² over all basis pairs, recomputed with sparse
/// multivector arithmetic.
inline double relation_residual(const RingPresentation& ring,
                                const std::vector<std::vector<NumericMultivector>>& images) {
  const int n = ring.formal_dim();
  double total = 0.0;
  for (int j = 0; j <= n; ++j)
    for (int k = 0; j + k <= n; ++k)
      for (int a = 0; a < ring.betti(j); ++a)
        for (int b = 0; b < ring.betti(k); ++b) {
          auto diff = wedge(images[j][a], images[k][b]);
          for (int c = 0; c < ring.betti(j + k); ++c) {
            const Rational s = ring.sc(j, k, a, b, c);
            if (s != 0) diff -= to_double(s) * images[j + k][c];
          }
          for (const auto& [blade, v] : diff.terms()) total += v * v;
        }
  return total;
}

namespace detail {

struct RestartResult {
  Eigen::VectorXd params;
  double residual = std::numeric_limits<double>::infinity();
  std::vector<double> margins;
  bool success = false;
};

/// Levenberg–Marquardt from one random start.
inline RestartResult run_restart(const EmbeddingProblem& prob, const SearchConfig& cfg,
                                 int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed),
                    static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd p(prob.num_params());
  for (auto& v : p) v = normal(rng);

  Eigen::VectorXd r, r_try;
  Eigen::MatrixXd jac;
  prob.evaluate(p, r, &jac);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  const double target = std::min(cfg.tol_residual * 1e-6, 1e-20);
  for (int it = 0; it < cfg.max_iters && cost > target; ++it) {
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 12 && !improved; ++tries) {
      Eigen::MatrixXd a = jtj;
      a.diagonal().array() += lambda * (1.0 + jtj.diagonal().array());
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      const Eigen::VectorXd trial = p + step;
      prob.evaluate(trial, r_try, nullptr);
      const double trial_cost = r_try.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        p = trial;
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
      } else {
        lambda *= 4.0;
      }
    }
    if (!improved) break;
    prob.evaluate(p, r, &jac);
  }
  RestartResult out;
  out.params = p;
  out.residual = cost;
  out.margins = prob.injectivity_margins(p);
  out.success = cost < cfg.tol_residual &&
                *std::min_element(out.margins.begin(), out.margins.end()) > cfg.tol_injectivity;
  return out;
}

}  // namespace detail

/// Multistart search for Φ. Restarts run in fixed-size batches; the outcome
/// depends only on the seed, never on thread scheduling.
inline SearchOutcome search_embedding(const RingPresentation& ring, const SearchConfig& cfg) {
  cfg.validate();
  const EmbeddingProblem prob(ring);
  constexpr int kBatch = 8;
  SearchOutcome out;
  std::optional<detail::RestartResult> best;
  int best_index = -1;
  for (int start = 0; start < cfg.restarts; start += kBatch) {
    const int count = std::min(kBatch, cfg.restarts - start);
    std::vector<detail::RestartResult> batch(count);
    parallel_for(count, [&](std::size_t i) {
      batch[i] = detail::run_restart(prob, cfg, start + static_cast<int>(i));
    });
    for (int i = 0; i < count; ++i) {
      const auto& cand = batch[i];
      const bool better =
          !best || (cand.success && !best->success) ||
          (cand.success == best->success && cand.residual < best->residual);
      if (better) {
        best = cand;
        best_index = start + i;
      }
    }
    out.stats.restarts_run = start + count;
    if (best && best->success) break;
  }
  out.stats.best_restart = best_index;
  out.stats.best_residual = best->residual;
  out.stats.best_margins = best->margins;
  if (best->success) {
    EmbeddingWitness w;
    w.images = prob.images(best->params);
    w.residual = relation_residual(ring, w.images);
    w.injectivity_margins = best->margins;
    out.witness = std::move(w);
  }
  return out;
}

enum class Verdict { Embeds, Obstructed, Unknown };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Embeds: return "Embeds";
    case Verdict::Obstructed: return "Obstructed";
    case Verdict::Unknown: return "Unknown";
  }
  return "?";
}

struct ObstructionReport {
  Verdict verdict = Verdict::Unknown;
  std::string obstructing_check;
  std::vector<CheckResult> checks;
  std::optional<EmbeddingWitness> witness;
  std::optional<SearchStats> search_stats;
  std::vector<std::string> notes;
};

/// Exact checks first, numerical search only if none fails.
inline ObstructionReport verdict(const RingPresentation& ring, const SearchConfig& cfg) {
  cfg.validate();
  auto v = validate(ring);
  if (!v.valid) throw std::invalid_argument("invalid ring: " + v.axiom + ": " + v.detail);
  ObstructionReport report;
  report.checks = {check_betti_bounds(ring), check_exterior_power_h1(ring),
                   check_definiteness_bounds(ring)};
  for (const auto& c : report.checks) {
    if (c.applicable && !c.passed) {
      report.verdict = Verdict::Obstructed;
      report.obstructing_check = c.name;
      report.notes.push_back("no graded-algebra embedding into the exterior algebra exists; "
                             "the manifold is not quasiregularly elliptic");
      if (c.derived)
        report.notes.push_back(c.name + " is a derived necessary condition");
      return report;
    }
  }
  auto outcome = search_embedding(ring, cfg);
  report.search_stats = outcome.stats;
  if (outcome.witness) {
    report.verdict = Verdict::Embeds;
    report.witness = std::move(outcome.witness);
    report.notes.push_back("an embedding exists; this is necessary, not sufficient, for "
                           "quasiregular ellipticity");
  } else {
    report.verdict = Verdict::Unknown;
    report.notes.push_back("search found no witness; this is not an obstruction");
  }
  return report;
}

}  // namespace qre
