// Copyright Contributors to the qre-toolkit Project
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "properties.hpp"
#include "qre/cohomology_ring.hpp"
#include "qre/four_manifold.hpp"
#include "qre/obstruction.hpp"

using namespace qre;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RingPresentation sum_of(const RingPresentation& r, int copies) {
  auto out = r;
  for (int c = 1; c < copies; ++c) out = connected_sum(out, r);
  return out;
}

Eigen::MatrixXd to_eigen(const RationalMatrix& g) {
  Eigen::MatrixXd m(g.rows(), g.cols());
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) m(i, j) = to_double(g(i, j));
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// rings

TEST_CASE("builders produce valid rings with expected Betti numbers", "[cohomology_ring]") {
  CHECK(build_sphere(4).betti() == std::vector<int>{1, 0, 0, 0, 1});
  CHECK(build_torus(3).betti() == std::vector<int>{1, 3, 3, 1});
  CHECK(build_torus(4).betti() == std::vector<int>{1, 4, 6, 4, 1});
  CHECK(build_cp2().betti() == std::vector<int>{1, 0, 1, 0, 1});
  CHECK(build_s2xs2().betti() == std::vector<int>{1, 0, 2, 0, 1});
  CHECK_THROWS(build_sphere(1));
  for (int n = 2; n <= 6; ++n) {
    CHECK(validate(build_sphere(n)).valid);
    CHECK(validate(build_torus(n)).valid);
  }
}

TEST_CASE("torus ring agrees with the exterior algebra", "[cohomology_ring]") {
  const auto t = build_torus(4);
  // x1 x2 x3 x4 evaluates to 1 and the order flips the sign.
  auto prod = t.unit();
  for (int i : {0, 1, 2, 3}) prod = cup(t, prod, t.basis(1, i));
  CHECK(t.evaluate(prod) == 1);
  auto swapped = t.unit();
  for (int i : {1, 0, 2, 3}) swapped = cup(t, swapped, t.basis(1, i));
  CHECK(t.evaluate(swapped) == -1);
  CHECK(cup(t, t.basis(1, 2), t.basis(1, 2)).is_zero());
}

TEST_CASE("validation names the failing axiom", "[cohomology_ring]") {
  SECTION("commutativity") {
    auto r = build_s2xs2();
    r.sc(2, 2, 0, 1, 0) = 2;
    CHECK(validate(r).axiom == "graded-commutativity");
  }
  SECTION("unit") {
    auto r = build_cp2();
    r.sc(0, 2, 0, 0, 0) = 2;
    CHECK(validate(r).axiom == "unit");
  }
  SECTION("duality") {
    auto r = build_s2xs2();
    r.sc(2, 2, 0, 1, 0) = 0;
    r.sc(2, 2, 1, 0, 0) = 0;
    const auto v = validate(r);
    CHECK_FALSE(v.valid);
    CHECK(v.axiom == "poincare-duality");
  }
  SECTION("betti") {
    RingPresentation r(2, {1, 0, 2});
    r.set_unit_products();
    CHECK(validate(r).axiom == "connected-closed-oriented");
  }
}

TEST_CASE("connected sum adds Betti numbers and preserves pairings", "[cohomology_ring]") {
  const auto s = connected_sum(build_cp2(), build_cp2bar());
  CHECK(s.betti() == std::vector<int>{1, 0, 2, 0, 1});
  const auto f = intersection_form(s);
  CHECK(f.beta_plus() == 1);
  CHECK(f.beta_minus() == 1);
  CHECK_FALSE(f.is_even());

  const auto t = connected_sum(build_torus(3), build_torus(3));
  CHECK(t.betti() == std::vector<int>{1, 6, 6, 1});
  CHECK(validate(t).valid);
  // Cross products vanish.
  CHECK(cup(t, t.basis(1, 0), t.basis(1, 3)).is_zero());

  CHECK_THROWS_AS(connected_sum(build_torus(3), build_cp2()), std::invalid_argument);
}

TEST_CASE("Poincare duality holds on random classes", "[cohomology_ring][property]") {
  const auto d = props::duality(21, 2000);
  INFO(d.first_failure);
  CHECK(d.ok());
}

// ---------------------------------------------------------------------------
// obstruction engine

TEST_CASE("exact checks pass on embeddable rings", "[obstruction]") {
  for (const auto& r : {build_torus(4), build_sphere(4), build_cp2(), build_s2xs2()}) {
    CHECK(check_betti_bounds(r).passed);
    CHECK(check_exterior_power_h1(r).passed);
    CHECK(check_definiteness_bounds(r).passed);
  }
}

TEST_CASE("Betti bound certificate", "[obstruction]") {
  // b_2 = 8 > C(4,2) = 6.
  const auto r = sum_of(build_s2xs2(), 4);
  const auto c = check_betti_bounds(r);
  REQUIRE_FALSE(c.passed);
  const auto& cert = std::get<BettiCertificate>(c.certificate);
  CHECK(cert.degree == 2);
  CHECK(cert.betti == 8);
  CHECK(cert.bound == 6);
  CHECK(verify_certificate(r, c));
}

TEST_CASE("definiteness certificate agrees with eigenvalues", "[obstruction]") {
  const auto r = sum_of(build_cp2(), 4);
  const auto c = check_definiteness_bounds(r);
  REQUIRE_FALSE(c.passed);
  const auto& cert = std::get<DefinitenessCertificate>(c.certificate);
  const auto ref = oracle::eigen_inertia(to_eigen(middle_pairing(r)));
  CHECK(cert.positive == ref.positive);
  CHECK(cert.negative == ref.negative);
  CHECK(cert.bound == 3);
  CHECK(verify_certificate(r, c));
  CHECK(check_definiteness_bounds(sum_of(build_cp2(), 3)).passed);
}

TEST_CASE("exterior power certificate is a genuine kernel vector", "[obstruction]") {
  // T³ # T³ has b_1 = 6 but x1 x4 = 0.
  const auto r = connected_sum(build_torus(3), build_torus(3));
  const auto c = check_exterior_power_h1(r);
  REQUIRE_FALSE(c.passed);
  const auto& cert = std::get<ExteriorPowerCertificate>(c.certificate);
  CHECK(cert.degree == 2);
  // Independent rank of the cup map from the oracle.
  const auto m = exterior_power_map(r, 2);
  CHECK(oracle::numeric_rank(to_eigen(m)) == static_cast<int>(cert.rank));
  CHECK(static_cast<int>(cert.rank) < 15);
  CHECK(verify_certificate(r, c));
}

TEST_CASE("tampered certificates are rejected", "[obstruction]") {
  const auto r = connected_sum(build_torus(3), build_torus(3));
  auto c = check_exterior_power_h1(r);
  auto& cert = std::get<ExteriorPowerCertificate>(c.certificate);
  for (auto& v : cert.kernel_vector) v = 0;
  CHECK_FALSE(verify_certificate(r, c));
  CHECK_FALSE(verify_certificate(build_torus(4), check_betti_bounds(build_torus(4))));
}

TEST_CASE("search finds witnesses that satisfy the equations", "[obstruction]") {
  SearchConfig cfg;
  cfg.restarts = 16;
  for (const auto& r : {build_torus(3), build_cp2(), build_s2xs2(),
                        connected_sum(build_cp2(), build_cp2bar())}) {
    const auto rep = verdict(r, cfg);
    REQUIRE(rep.verdict == Verdict::Embeds);
    REQUIRE(rep.witness);
    CHECK(rep.witness->residual < cfg.tol_residual);
    CHECK(relation_residual(r, rep.witness->images) < 1e-6);
    for (double m : rep.witness->injectivity_margins) CHECK(m > cfg.tol_injectivity);
  }
}

TEST_CASE("search is deterministic for a seed", "[obstruction]") {
  SearchConfig cfg;
  cfg.restarts = 8;
  cfg.seed = 7;
  const auto a = search_embedding(build_s2xs2(), cfg);
  const auto b = search_embedding(build_s2xs2(), cfg);
  CHECK(a.stats.best_restart == b.stats.best_restart);
  CHECK(a.stats.best_residual == b.stats.best_residual);
}

TEST_CASE("invalid rings and configs are rejected", "[obstruction]") {
  auto r = build_s2xs2();
  r.sc(2, 2, 0, 1, 0) = 2;
  CHECK_THROWS_AS(verdict(r, SearchConfig{}), std::invalid_argument);
  SearchConfig bad;
  bad.restarts = 0;
  CHECK_THROWS_AS(verdict(build_cp2(), bad), std::invalid_argument);
}

TEST_CASE("analytic gradient matches finite differences", "[obstruction][property]") {
  double worst = 0;
  const auto g = props::gradient(31, 300, &worst);
  INFO(g.first_failure);
  CHECK(g.ok());
  CHECK(worst < 1e-4);
}

// ---------------------------------------------------------------------------
// four-manifold classifier

TEST_CASE("forms are validated", "[four_manifold]") {
  CHECK_THROWS_AS(IntersectionForm(IntMatrix{{1, 1}, {0, 1}}), FormError);
  CHECK_THROWS_AS(IntersectionForm(IntMatrix{{2}}), FormError);
  CHECK_THROWS_AS(IntersectionForm(IntMatrix{{1, 0}}), FormError);
  try {
    IntersectionForm(IntMatrix{{1, 2}, {3, 1}});
  } catch (const FormError& e) {
    CHECK(e.witness() == "entry (0,1)");
  }
}

TEST_CASE("classification of basic forms", "[four_manifold]") {
  CHECK(classify_simply_connected(IntersectionForm(IntMatrix{})) == HomeoType::sphere());
  CHECK(classify_simply_connected(IntersectionForm(IntMatrix{{1}})).name() == "CP^2");
  CHECK(classify_simply_connected(IntersectionForm(IntMatrix{{0, 1}, {1, 0}})).name() == "S^2 x S^2");
  CHECK(classify_simply_connected(IntersectionForm(IntMatrix{{1, 0}, {0, -1}})).name() == "CP^2 # CP^2bar");
  CHECK(classify_simply_connected(IntersectionForm(IntMatrix{{1, 0, 0, 0},
                                                    {0, 1, 0, 0},
                                                    {0, 0, 1, 0},
                                                    {0, 0, 0, 1}}))
            .kind == HomeoType::Kind::OutsideSupportedRegime);
}

TEST_CASE("even forms with unequal definite parts are rejected", "[four_manifold]") {
  // Rank-2 even unimodular forms are hyperbolic; E8 lies outside the regime.
  IntMatrix h = {{2, 1}, {1, 0}};
  CHECK(classify_simply_connected(IntersectionForm(h)).name() == "S^2 x S^2");
  IntMatrix e8 = {{2, -1, 0, 0, 0, 0, 0, 0},  {-1, 2, -1, 0, 0, 0, 0, 0}, {0, -1, 2, -1, 0, 0, 0, -1},
                  {0, 0, -1, 2, -1, 0, 0, 0}, {0, 0, 0, -1, 2, -1, 0, 0}, {0, 0, 0, 0, -1, 2, -1, 0},
                  {0, 0, 0, 0, 0, -1, 2, 0},  {0, 0, -1, 0, 0, 0, 0, 2}};
  const IntersectionForm f(e8);
  CHECK(f.beta_plus() == 8);
  CHECK(f.is_even());
  CHECK_FALSE(qre_ellipticity_decision(f).elliptic);
}

TEST_CASE("classification is invariant under unimodular congruence", "[four_manifold][property]") {
  std::mt19937_64 rng(5);
  const std::vector<IntMatrix> forms = {
      {{1, 0}, {0, -1}}, {{0, 1}, {1, 0}}, {{1, 0, 0}, {0, 1, 0}, {0, 0, -1}},
      {{0, 1, 0, 0}, {1, 0, 0, 0}, {0, 0, 0, 1}, {0, 0, 1, 0}}, {{1, 0, 0}, {0, -1, 0}, {0, 0, -1}}};
  for (const auto& q : forms) {
    const auto base = classify_simply_connected(IntersectionForm(q));
    const std::size_t n = q.size();
    for (int t = 0; t < 50; ++t) {
      // Product of random elementary matrices I + c E_ab.
      IntMatrix p(n, std::vector<std::int64_t>(n, 0));
      for (std::size_t i = 0; i < n; ++i) p[i][i] = 1;
      for (int s = 0; s < 4; ++s) {
        const std::size_t a = rng() % n, b = rng() % n;
        if (a == b) continue;
        const std::int64_t c = static_cast<std::int64_t>(rng() % 5) - 2;
        for (std::size_t i = 0; i < n; ++i) p[i][a] += c * p[i][b];
      }
      IntMatrix m(n, std::vector<std::int64_t>(n, 0));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t k = 0; k < n; ++k)
            for (std::size_t l = 0; l < n; ++l) m[i][j] += p[k][i] * q[k][l] * p[l][j];
      CHECK(classify_simply_connected(IntersectionForm(m)) == base);
    }
  }
}

TEST_CASE("table matches the golden files", "[four_manifold]") {
  const auto t = generate_table();
  CHECK(render_table(t) == slurp(QRE_GOLDEN_DIR "/classification_table.txt"));
  const auto golden = nlohmann::json::parse(slurp(QRE_GOLDEN_DIR "/classification_table.json"));
  for (int minus = 0; minus <= 3; ++minus)
    for (int plus = 0; plus <= 3; ++plus) {
      std::vector<std::string> names;
      for (const auto& h : table_cell(t, plus, minus)) names.push_back(h.name());
      CHECK(names == golden["rows"][minus][plus].get<std::vector<std::string>>());
    }
}

TEST_CASE("table entries round-trip through forms", "[four_manifold]") {
  const auto t = generate_table();
  for (int minus = 0; minus <= 3; ++minus)
    for (int plus = 0; plus <= 3; ++plus)
      for (const auto& h : table_cell(t, plus, minus)) {
        IntMatrix q;
        const std::size_t n = plus + minus;
        q.assign(n, std::vector<std::int64_t>(n, 0));
        if (h.kind == HomeoType::Kind::SumS2xS2) {
          for (std::size_t b = 0; b < n; b += 2) q[b][b + 1] = q[b + 1][b] = 1;
        } else {
          for (std::size_t i = 0; i < n; ++i) q[i][i] = static_cast<int>(i) < plus ? 1 : -1;
        }
        const IntersectionForm f(q);
        CHECK(f.beta_plus() == plus);
        CHECK(f.beta_minus() == minus);
        CHECK(classify_simply_connected(f) == h);
        CHECK(classify_simply_connected(intersection_form(build_from_form(q))) == h);
      }
}
