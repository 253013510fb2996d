// Copyright Contributors to the qre-toolkit Project
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "properties.hpp"
#include "qre/cli.hpp"

using namespace qre;
using io::Json;

namespace {

using Clock = std::chrono::steady_clock;

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RingPresentation load_ring(const std::string& name) {
  return io::ring_from_json(io::parse(slurp(std::string(QRE_RINGS_DIR) + "/" + name), name));
}

struct Check {
  bool pass = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      if (pass) detail = what;
      pass = false;
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

RingPresentation sum_of(const std::vector<RingPresentation>& parts) {
  if (parts.empty()) return build_sphere(4);
  auto r = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) r = connected_sum(r, parts[i]);
  return r;
}

// ---------------------------------------------------------------------------

Check table_reproduction() {
  Check v;
  const auto t = generate_table();
  const auto golden = nlohmann::json::parse(slurp(QRE_GOLDEN_DIR "/classification_table.json"));
  int cells = 0, duals = 0;
  for (int minus = 0; minus <= 3; ++minus)
    for (int plus = 0; plus <= 3; ++plus) {
      std::vector<std::string> names;
      for (const auto& h : table_cell(t, plus, minus)) names.push_back(h.name());
      v.require(names == golden["rows"][minus][plus].get<std::vector<std::string>>(),
                "cell (" + std::to_string(plus) + "," + std::to_string(minus) + ") differs");
      ++cells;
      if (names.size() == 2) {
        v.require(plus == minus, "unexpected dual entry");
        ++duals;
      }
    }
  v.require(cells == 16 && duals == 3, "expected 16 cells with 3 dual entries");
  const char* argv[] = {"qre", "classify", "--table", "--format", "text"};
  std::istringstream in;
  std::ostringstream out, err;
  v.require(cli::dispatch(5, argv, in, out, err) == 0, "classify --table failed");
  v.require(out.str() == slurp(QRE_GOLDEN_DIR "/classification_table.txt"), "text table differs from golden");
  v.detail = v.pass ? "16 cells, 3 dual entries, text byte-identical" : v.detail;
  return v;
}

Check decision_suite() {
  Check v;
  int elliptic = 0;
  for (int k = 0; k <= 3; ++k) {
    const auto r = sum_of(std::vector<RingPresentation>(k, build_s2xs2()));
    const auto d = qre_ellipticity_decision(intersection_form(r));
    v.require(d.elliptic && d.homeo == HomeoType::sum_s2xs2(k), "#" + std::to_string(k) + " S2xS2");
    elliptic += d.elliptic;
  }
  for (int j = 0; j <= 3; ++j)
    for (int i = 0; i <= 3; ++i) {
      std::vector<RingPresentation> parts(j, build_cp2());
      parts.insert(parts.end(), i, build_cp2bar());
      const auto d = qre_ellipticity_decision(intersection_form(sum_of(parts)));
      v.require(d.elliptic && d.homeo == HomeoType::sum_cp2(j, i),
                std::to_string(j) + " CP2 # " + std::to_string(i) + " CP2bar");
      elliptic += d.elliptic;
    }
  const IntersectionForm diag4({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
  v.require(!qre_ellipticity_decision(diag4).elliptic, "diag(1,1,1,1) decided elliptic");
  v.require(!qre_ellipticity_decision(intersection_form(load_ring("sum4_s2xs2.json"))).elliptic,
            "#4 S2xS2 decided elliptic");
  if (v.pass) v.detail = std::to_string(elliptic) + "/20 elliptic, 2/2 non-elliptic";
  return v;
}

Check exact_checks() {
  Check v;
  // Betti bound.
  const auto s4 = load_ring("sum4_s2xs2.json");
  const auto betti = check_betti_bounds(s4);
  const auto* bc = std::get_if<BettiCertificate>(&betti.certificate);
  v.require(!betti.passed && bc && bc->degree == 2 && bc->betti == 8 && bc->bound == 6, "betti certificate");
  v.require(bc && s4.betti(2) > oracle::binomial(4, 2), "betti oracle");
  v.require(verify_certificate(s4, betti), "betti re-verification");

  // Definiteness, with an inertia computed from raw structure constants.
  const auto c4 = load_ring("sum4_cp2.json");
  const auto def = check_definiteness_bounds(c4);
  const auto* dc = std::get_if<DefinitenessCertificate>(&def.certificate);
  Eigen::MatrixXd gram(c4.betti(2), c4.betti(2));
  for (int a = 0; a < c4.betti(2); ++a)
    for (int b = 0; b < c4.betti(2); ++b) gram(a, b) = to_double(c4.sc(2, 2, a, b, 0) * c4.fundamental()[0]);
  const auto inertia = oracle::eigen_inertia(gram);
  v.require(!def.passed && dc && dc->positive == 4 && dc->bound == 3, "definiteness certificate");
  v.require(dc && inertia.positive == dc->positive && inertia.negative == dc->negative, "definiteness oracle");
  v.require(verify_certificate(c4, def), "definiteness re-verification");

  // Exterior power in dimension 3, kernel checked against raw products.
  const auto t = load_ring("sum2_s1xs2.json");
  v.require(t.formal_dim() == 3 && t.betti() == std::vector<int>{1, 2, 2, 1}, "ring [1,2,2,1]");
  const auto ext = check_exterior_power_h1(t);
  const auto* ec = std::get_if<ExteriorPowerCertificate>(&ext.certificate);
  v.require(!ext.passed && ec, "exterior power certificate");
  if (ec) {
    const int b1 = t.betti(1), b2 = t.betti(2);
    const auto subs = oracle::subsets(b1, 2);
    Eigen::MatrixXd m(b2, subs.size());
    for (std::size_t s = 0; s < subs.size(); ++s)
      for (int c = 0; c < b2; ++c) m(c, s) = to_double(t.sc(1, 1, subs[s][0] - 1, subs[s][1] - 1, c));
    v.require(oracle::numeric_rank(m) == static_cast<int>(ec->rank), "exterior power rank oracle");
    v.require(oracle::numeric_rank(m) < static_cast<int>(subs.size()), "cup map is injective");
    Eigen::VectorXd kv(ec->kernel_vector.size());
    for (std::size_t s = 0; s < ec->kernel_vector.size(); ++s) kv(s) = to_double(ec->kernel_vector[s]);
    v.require(ec->degree != 2 || ((m * kv).norm() < 1e-12 && kv.norm() > 0), "kernel vector oracle");
    v.require(verify_certificate(t, ext), "exterior power re-verification");
  }
  if (v.pass) v.detail = "8 > 6, 4 > 3, rank " + std::to_string(ec->rank) + " < C(2,2); certificates re-verified";
  return v;
}

Check signature_oracle() {
  Check v;
  for (auto [n, k, want] : {std::tuple{4, 2, 3}, std::tuple{8, 4, 35}}) {
    const auto s = pairing_signature(n, k);
    const auto ref = oracle::eigen_inertia(oracle::pairing_gram(n, k));
    v.require(s.positive == want && s.negative == want, "signature (" + std::to_string(n) + "," + std::to_string(k) + ")");
    v.require(ref.positive == s.positive && ref.negative == s.negative && ref.zero == 0, "brute-force mismatch");
  }
  if (v.pass) v.detail = "(3,3) and (35,35) match brute-force diagonalization";
  return v;
}

Check embedding_search() {
  Check v;
  SearchConfig cfg;
  cfg.restarts = 64;
  cfg.seed = 0;
  double worst_res = 0, worst_margin = 1e300;
  for (const char* name : {"sphere4.json", "torus4.json", "cp2.json", "s2xs2.json", "sum3_s2xs2.json",
                           "sum3_cp2_sum3_cp2bar.json"}) {
    const auto r = load_ring(name);
    const auto rep = qre::verdict(r, cfg);
    v.require(rep.verdict == qre::Verdict::Embeds && rep.witness, std::string("no witness for ") + name);
    if (!rep.witness) continue;
    const double res = relation_residual(r, rep.witness->images);
    worst_res = std::max(worst_res, std::max(res, rep.witness->residual));
    v.require(res < 1e-8 && rep.witness->residual < 1e-8, std::string("residual for ") + name);
    // Injectivity margins from the images, recomputed by SVD.
    for (int k = 0; k <= r.formal_dim(); ++k) {
      if (r.betti(k) == 0) continue;
      const auto blades = basis_blades(r.formal_dim(), k);
      Eigen::MatrixXd m(blades.size(), r.betti(k));
      for (int a = 0; a < r.betti(k); ++a)
        for (std::size_t b = 0; b < blades.size(); ++b) m(b, a) = rep.witness->images[k][a].coefficient(blades[b]);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
      const double margin = svd.singularValues().minCoeff();
      worst_margin = std::min(worst_margin, margin);
      v.require(margin > 1e-6, std::string("injectivity margin for ") + name);
    }
  }
  if (v.pass) v.detail = "6/6 witnesses, max residual " + fmt(worst_res) + ", min margin " + fmt(worst_margin);
  return v;
}

Check measure_lab() {
  Check v;
  const auto battery = io::battery_from_json(io::parse(slurp(QRE_DATA_DIR "/psi_battery.json"), "psi_battery.json"));
  v.require(battery.size() == 6, "battery must have 6 functions");
  lab::QuadratureSpec q;
  q.grid = 2048;
  const auto rep = lab::vague_convergence_report(2, {1, 2, 4, 8, 16}, battery, q);
  double prev = 1e300;
  for (const auto& r : rep.records) {
    for (int b = 0; b < r.j; ++b) {
      // Independent target: cap area by the polar oracle plus a full sphere.
      const double target = oracle::disk_image_area(r.j == 0 ? 0 : -1.0 + (2.0 * b + 1.0) / r.j, 0.0, 1.0 / r.j,
                                                    400, 400) +
                            4 * std::numbers::pi;
      v.require(std::abs(r.ball_mass[b] - target) / target < 0.01, "ball mass at j = " + std::to_string(r.j));
    }
    v.require(r.doubling_ratio <= 3.02, "doubling ratio at j = " + std::to_string(r.j));
    v.require(r.outside_fraction <= 1.0 / r.j + 0.01, "outside fraction at j = " + std::to_string(r.j));
    v.require(r.negative_samples == 0, "negative Jacobian at j = " + std::to_string(r.j));
    if (r.j >= 2) {
      v.require(r.max_psi_err < prev, "psi error not decreasing at j = " + std::to_string(r.j));
      prev = r.max_psi_err;
    }
  }
  const auto& last = rep.records.back();
  v.require(last.max_psi_err < 0.05, "psi error at j = 16");
  v.require(last.max_psi_err < rep.records.front().max_psi_err, "psi error at j = 16 not below j = 1");
  if (v.pass) {
    double ratio = 0;
    for (const auto& r : rep.records) ratio = std::max(ratio, r.doubling_ratio);
    v.detail = "max doubling " + fmt(ratio) + ", psi error j=16 " + fmt(last.max_psi_err) + ", outside j=16 " +
               fmt(last.outside_fraction);
  }
  return v;
}

Check pullback_invariance() {
  Check v;
  bool inv2 = false, inv3 = false, rot = false;
  cli::pullback_invariance(2, 0, &inv2);
  cli::pullback_invariance(3, 0, &inv3);
  const auto r = cli::pullback_rotated(2, 8, 0.25, 0, &rot);
  v.require(inv2 && inv3, "normalized pullback not bit-identical");
  v.require(rot, "rotated-family discrepancy");
  double floor = 0, worst_correct = 0, worst_wrong = 1e300;
  for (const auto& run : r["runs"]) {
    floor = run["floor"].get<double>();
    for (double d : run["delta"].get<std::vector<double>>()) {
      if (run["expected_limit"].get<bool>()) worst_correct = std::max(worst_correct, d);
      else worst_wrong = std::min(worst_wrong, d);
    }
  }
  v.require(floor > 0, "floor must be positive");
  if (v.pass)
    v.detail = "100 specs bit-identical; correct delta <= " + fmt(worst_correct) + ", wrong delta >= " +
               fmt(worst_wrong) + " vs floor " + fmt(floor);
  return v;
}

Check lemma_suite() {
  Check v;
  bool nb2 = false, nb3 = false;
  cli::pullback_norm_bound(2, &nb2);
  cli::pullback_norm_bound(3, &nb3);
  v.require(nb2 && nb3, "norm bound battery");
  bool decay = false;
  const auto r = cli::pullback_exact_decay(2, 8, &decay);
  v.require(decay, "exact decay battery");
  double worst_tau = -1;
  for (const auto& row : r["rows"]) {
    std::vector<double> ratios;
    for (const auto& s : row["steps"]) ratios.push_back(s["ratio"].get<double>());
    const bool trivial = row["C"].get<double>() == 0.0;
    if (!trivial) {
      const double tau = oracle::kendall(ratios);
      worst_tau = std::max(worst_tau, tau);
      v.require(tau <= 0.0, "growth trend for " + row["alpha"].get<std::string>());
      v.require(*std::min_element(ratios.begin(), ratios.end()) > 0, "vanishing ratio");
    }
  }
  if (v.pass) v.detail = "norm bounds hold for n = 2, 3; decay ratios bounded, max tau " + fmt(worst_tau);
  return v;
}

Check algebra_properties() {
  Check v;
  const int cases = 10000;
  const auto a = props::anticommutativity(1, cases);
  const auto b = props::associativity(2, cases);
  const auto c = props::duality(3, cases);
  double worst = 0;
  const auto d = props::gradient(4, cases, &worst);
  v.require(a.ok() && a.cases == cases, "anticommutativity: " + a.first_failure);
  v.require(b.ok() && b.cases == cases, "associativity: " + b.first_failure);
  v.require(c.ok() && c.cases == cases, "duality: " + c.first_failure);
  v.require(d.ok() && d.cases == cases, "gradient: " + d.first_failure);
  if (v.pass) v.detail = "4 x 10000 cases, max gradient rel. err " + fmt(worst);
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0 for no runtime limit
    std::function<Check()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "classification table", 1.0, table_reproduction},
      {2, "ellipticity decisions", 0, decision_suite},
      {3, "exact obstruction certificates", 0, exact_checks},
      {4, "pairing signatures", 5.0, signature_oracle},
      {5, "embedding search", 60.0, embedding_search},
      {6, "measure lab", 300.0, measure_lab},
      {7, "pullback invariance and limits", 0, pullback_invariance},
      {8, "norm bound and exact decay", 0, lemma_suite},
      {9, "algebra properties", 0, algebra_properties},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Check v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (c.limit_s > 0 && secs >= c.limit_s) {
      if (v.pass) v.detail = "runtime limit exceeded";
      v.pass = false;
    }
    failed += !v.pass;
    std::printf("%s criterion %d: %s (%s) [%.2f s]\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
