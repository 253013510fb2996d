// Copyright Contributors to the qre-toolkit Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qre/io.hpp"

namespace qre::cli {

using io::Json;

enum ExitCode : int { kOk = 0, kUsage = 1, kFailed = 2 };

struct Output {
  std::string path;  // empty or "-" means the output stream
  std::ostream* stream = nullptr;

  void write(const std::string& text) const {
    if (path.empty() || path == "-") {
      *stream << text;
      return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io::InputError("", "cannot write " + path);
    f << text;
  }
};

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json envelope(const std::string& command, const Json& config, const Json& result) {
  return Json{{"schema", io::kSchema}, {"command", command}, {"config", config}, {"result", result}};
}

// ---------------------------------------------------------------------------
// ring

inline RingPresentation build_named(const std::string& kind, int dim, const std::string& form_path,
                                    std::istream& in) {
  if (kind == "sphere") return build_sphere(dim);
  if (kind == "torus") return build_torus(dim);
  if (kind == "cp2") return build_cp2();
  if (kind == "cp2bar") return build_cp2bar();
  if (kind == "s2xs2") return build_s2xs2();
  if (kind == "form") {
    if (form_path.empty()) throw io::InputError("", "--kind form needs --form");
    return build_from_form(io::form_from_json(io::parse(io::read_text(form_path, in), form_path)));
  }
  throw io::InputError("", "unknown ring kind '" + kind + "'");
}

inline Json ring_document(const RingPresentation& r, const Json& config) {
  Json j = io::to_json(r);
  Json out{{"schema", io::kSchema}, {"config", config}};
  for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = it.value();
  return out;
}

// ---------------------------------------------------------------------------
// pullback cases

inline Json pullback_invariance(int n, std::uint64_t seed, bool* pass) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 7u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> shift(-100.0, 100.0), logr(-5.0, 5.0);
  std::vector<pullback::AffineMapSpec> specs;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(n);
    for (auto& v : a) v = shift(rng);
    specs.push_back({a, std::exp(logr(rng))});
  }
  Json degrees = Json::array();
  bool all = true;
  for (int k = 1; k <= n - 1; ++k) {
    ExactMultivector form(n);
    int coeff = 1;
    for (Blade b : basis_blades(n, k)) form.add_term(b, Rational(coeff++, 3));
    const auto ref = pullback::normalized_pullback_affine(form, specs[0]);
    bool identical = true;
    for (const auto& s : specs) identical = identical && pullback::normalized_pullback_affine(form, s).form == ref.form;
    all = all && identical;
    degrees.push_back(Json{{"k", k},
                           {"form", io::to_json(form)},
                           {"normalization", ref.normalization},
                           {"r_exponent", io::to_json(ref.r_exponent)},
                           {"output", io::to_json(ref.form)},
                           {"bit_identical", identical}});
  }
  *pass = all;
  return Json{{"specs", specs.size()}, {"unit_ball_measure", pullback::unit_ball_measure(n)}, {"degrees", degrees}};
}

inline Json pullback_rotated(int n, int jmax, double turns, std::uint64_t seed, bool* pass) {
  auto spec = pullback::RotatedFamilySpec::plane_rotation(n, 2 * std::numbers::pi * turns);
  Json out{{"Q", std::vector<std::vector<double>>()}};
  for (int r = 0; r < n; ++r) {
    std::vector<double> row;
    for (int c = 0; c < n; ++c) row.push_back(spec.Q(r, c));
    out["Q"].push_back(row);
  }
  bool ok = true;
  Json runs = Json::array();
  for (int k = 1; k <= n - 1; ++k) {
    using pullback::Sequence;
    using pullback::Target;
    const std::pair<Sequence, Target> cases[] = {{Sequence::Centered, Target::Lpi},
                                                 {Sequence::BallFollowing, Target::QLpi},
                                                 {Sequence::BallFollowing, Target::Lpi}};
    for (auto [seq, tgt] : cases) {
      const auto rep = pullback::limit_discrepancy(spec, k, seq, tgt, jmax);
      const bool correct = !(seq == Sequence::BallFollowing && tgt == Target::Lpi);
      std::vector<double> deltas;
      for (const auto& s : rep.steps) deltas.push_back(s.delta);
      bool case_ok = true;
      if (correct) {
        for (std::size_t i = 0; i < deltas.size(); ++i) {
          if (deltas[i] > 1e-6) case_ok = false;
          if (i >= 2 && deltas[i] > deltas[i - 1] + 1e-12) case_ok = false;
        }
      } else {
        for (double d : deltas)
          if (d < 0.5 * rep.floor) case_ok = false;
      }
      ok = ok && case_ok;
      runs.push_back(Json{{"k", k},
                          {"sequence", pullback::to_string(seq)},
                          {"target", pullback::to_string(tgt)},
                          {"expected_limit", correct},
                          {"delta", deltas},
                          {"floor", rep.floor},
                          {"pass", case_ok}});
    }
  }
  Json distortion = Json::array();
  for (int j = 1; j <= 3; ++j) {
    const auto d = pullback::hQ_distortion_estimate(spec, j, pullback::SampleRegion::Annulus, 4096, seed);
    distortion.push_back(Json{{"j", j}, {"annulus_estimate", d.estimate}, {"flagged", d.flagged}});
  }
  out["battery"] = "8 bump forms per degree, centers 0.4 from the origin, supported in the unit ball";
  out["runs"] = runs;
  out["hQ_distortion"] = distortion;
  *pass = ok;
  return out;
}

inline Json pullback_norm_bound(int n, bool* pass) {
  std::vector<pullback::AffineMapSpec> specs;
  specs.push_back({std::vector<double>(n, 0.0), 1.0});
  std::vector<double> a1(n, 0.0), a2(n, 0.0), a3(n, 0.0);
  a1[0] = 0.7, a1[1] = -1.3;
  a2[0] = 3.0, a2[1] = 2.0;
  a3[0] = -10.0, a3[n - 1] = 5.0;
  specs.push_back({a1, 0.5});
  specs.push_back({a2, 4.0});
  specs.push_back({a3, 0.01});
  std::vector<NumericMultivector> alphas;
  for (int k = 1; k <= n - 1; ++k) {
    const auto blades = basis_blades(n, k);
    for (Blade b : blades) {
      NumericMultivector m(n);
      m.add_term(b, 1.0);
      alphas.push_back(m);
    }
    NumericMultivector mix(n);
    double c = 3.0;
    for (Blade b : blades) {
      mix.add_term(b, c);
      c = -c + 1.0;
    }
    alphas.push_back(mix);
  }
  alphas.push_back(NumericMultivector(n));
  Json rows = Json::array();
  bool ok = true;
  for (const auto& s : specs)
    for (const auto& alpha : alphas) {
      const auto r = pullback::norm_bound_check({s, false, {}}, alpha);
      ok = ok && r.pass;
      rows.push_back(Json{{"a", s.a},        {"r", s.r},          {"alpha", io::to_json(alpha)},
                          {"lhs", r.lhs},    {"rhs", r.rhs},      {"sharper_bound", r.sharper},
                          {"D", r.D},        {"K", r.K},          {"pass", r.pass}});
    }
  *pass = ok;
  return Json{{"family", "torus coverings pi o T_{a,r}"}, {"tolerance", 1e-3}, {"rows", rows}};
}

inline Json pullback_exact_decay(int n, int jmax, bool* pass) {
  std::vector<int> js;
  for (int j = 1; j <= jmax; ++j) js.push_back(j);
  Json rows = Json::array();
  bool ok = true;
  auto battery = pullback::trig_battery(n);
  battery.push_back({"constant", std::vector<int>(n, 0), std::vector<bool>(n, false)});
  const auto tent = pullback::default_tent(n);
  auto zero_tent = tent;
  zero_tent.scale = 0.0;
  auto add = [&](const pullback::TrigFunction& g, const pullback::TentForm& phi, const std::string& phi_id) {
    const auto rep = pullback::exact_decay_check(n, g, phi, js);
    const bool trivial = g.closed() || phi.scale == 0.0;
    bool row_ok;
    if (trivial) {
      row_ok = rep.C == 0.0;
    } else {
      row_ok = std::isfinite(rep.max_over_min) && rep.kendall_tau <= 0.0;
    }
    ok = ok && row_ok;
    Json steps = Json::array();
    for (const auto& s : rep.steps)
      steps.push_back(Json{{"j", s.j}, {"r", s.r}, {"A", s.area}, {"integral", s.integral}, {"ratio", s.ratio}});
    rows.push_back(Json{{"alpha", g.id},
                        {"phi", phi_id},
                        {"steps", steps},
                        {"C", rep.C},
                        {"max_over_min", std::isfinite(rep.max_over_min) ? Json(rep.max_over_min) : Json("inf")},
                        {"kendall_tau", rep.kendall_tau},
                        {"pass", row_ok}});
  };
  for (const auto& g : battery) add(g, tent, "tent");
  add(battery.front(), zero_tent, "zero");
  *pass = ok;
  return Json{{"torus", "R^n / 2 pi Z^n"},
              {"coverings", "pi o T_{0, 2^j}"},
              {"tent", Json{{"center", tent.center}, {"radius", tent.radius}, {"slot", tent.slot}}},
              {"rows", rows}};
}

// ---------------------------------------------------------------------------

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw io::InputError("", "malformed integer list '" + s + "'");
    }
  }
  if (out.empty()) throw io::InputError("", "empty integer list");
  return out;
}

/// Runs one CLI invocation; returns the process exit code.
inline int dispatch(int argc, const char* const* argv, std::istream& in, std::ostream& out,
                    std::ostream& err) {
  CLI::App app{"qre: cohomological obstructions to quasiregular ellipticity", "qre"};
  app.require_subcommand(1, 1);
  std::string out_path;

  // ring
  auto* ring = app.add_subcommand("ring", "construct cohomology rings");
  ring->require_subcommand(1, 1);
  auto* ring_new = ring->add_subcommand("new", "build a ring from a named model");
  std::string kind, form_path;
  int dim = 4, copies = 1;
  ring_new->add_option("--kind", kind, "sphere|torus|cp2|cp2bar|s2xs2|form")->required();
  ring_new->add_option("--dim", dim, "dimension for sphere and torus");
  ring_new->add_option("--form", form_path, "intersection form JSON for --kind form");
  ring_new->add_option("--copies", copies, "connected sum of this many copies")->check(CLI::Range(1, 64));
  ring_new->add_option("--out", out_path, "output path (default stdout)");
  auto* ring_sum = ring->add_subcommand("sum", "connected sum of ring files");
  std::vector<std::string> sum_inputs;
  ring_sum->add_option("rings", sum_inputs, "ring JSON files")->required()->expected(2, 64);
  ring_sum->add_option("--out", out_path, "output path (default stdout)");

  // obstruct
  auto* obstruct = app.add_subcommand("obstruct", "obstruction verdicts");
  obstruct->require_subcommand(1, 1);
  auto* check = obstruct->add_subcommand("check", "run exact checks and the embedding search");
  std::string ring_path, config_path;
  std::optional<std::uint64_t> seed_opt;
  std::optional<int> restarts_opt;
  check->add_option("ring", ring_path, "ring JSON file or - for stdin")->required();
  check->add_option("--config", config_path, "search config JSON");
  check->add_option("--seed", seed_opt, "PRNG seed");
  check->add_option("--restarts", restarts_opt, "restart budget");
  check->add_option("--out", out_path, "report path (default stdout)");

  // classify and table
  auto* classify = app.add_subcommand("classify", "classify an intersection form");
  std::string classify_input, format = "json";
  bool want_table = false;
  classify->add_option("form", classify_input, "form JSON file or - for stdin");
  classify->add_flag("--table", want_table, "emit the classification table");
  classify->add_option("--format", format, "json|text")->check(CLI::IsMember({"json", "text"}));
  classify->add_option("--out", out_path, "output path (default stdout)");
  auto* table = app.add_subcommand("table", "emit the classification table");
  table->add_option("--format", format, "json|text")->check(CLI::IsMember({"json", "text"}));
  table->add_option("--out", out_path, "output path (default stdout)");

  // measure lab
  auto* lab_cmd = app.add_subcommand("measure-lab", "winding-map measure lab");
  lab_cmd->require_subcommand(1, 1);
  auto* lab_run = lab_cmd->add_subcommand("run", "vague convergence report");
  int lab_n = 2;
  std::string js_text = "1,2,4,8,16", battery_path, lab_format = "csv";
  lab::QuadratureSpec quad;
  lab_run->add_option("--n", lab_n, "dimension (2 or 3)");
  lab_run->add_option("--j", js_text, "comma-separated family indices");
  lab_run->add_option("--grid", quad.grid, "quadrature resolution");
  lab_run->add_option("--samples", quad.samples, "distortion samples");
  lab_run->add_option("--seed", quad.seed, "PRNG seed");
  lab_run->add_option("--battery", battery_path, "test-function JSON (default: built-in six)");
  lab_run->add_option("--format", lab_format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  lab_run->add_option("--out", out_path, "output path (default stdout)");

  // pullback
  auto* pb = app.add_subcommand("pullback", "pullback verifier");
  pb->require_subcommand(1, 1);
  auto* verify = pb->add_subcommand("verify", "run one verification case");
  std::string pb_case;
  int pb_n = 2, jmax = 8;
  double turns = 0.25;
  std::uint64_t pb_seed = 0;
  verify->add_option("--case", pb_case, "invariance|rotated|norm-bound|exact-decay")
      ->required()
      ->check(CLI::IsMember({"invariance", "rotated", "norm-bound", "exact-decay"}));
  verify->add_option("--n", pb_n, "dimension (2 or 3)");
  verify->add_option("--jmax", jmax, "largest sequence index");
  verify->add_option("--turns", turns, "rotation angle of Q in turns (rotated case)");
  verify->add_option("--seed", pb_seed, "PRNG seed");
  verify->add_option("--out", out_path, "report path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const Output sink{out_path, &out};
  try {
    if (*ring_new) {
      RingPresentation r = build_named(kind, dim, form_path, in);
      for (int c = 1; c < copies; ++c) r = connected_sum(r, build_named(kind, dim, form_path, in));
      sink.write(dump(ring_document(r, Json{{"kind", kind}, {"dim", dim}, {"copies", copies}})));
      return kOk;
    }
    if (*ring_sum) {
      std::optional<RingPresentation> acc;
      for (const auto& p : sum_inputs) {
        auto r = io::ring_from_json(io::parse(io::read_text(p, in), p));
        const auto v = validate(r);
        if (!v.valid) throw io::InputError("", p + ": invalid ring: " + v.axiom + ": " + v.detail);
        acc = acc ? connected_sum(*acc, r) : r;
      }
      sink.write(dump(ring_document(*acc, Json{{"inputs", sum_inputs}})));
      return kOk;
    }
    if (*check) {
      SearchConfig cfg;
      if (!config_path.empty()) cfg = io::search_config_from_json(io::parse(io::read_text(config_path, in), config_path));
      if (seed_opt) cfg.seed = *seed_opt;
      if (restarts_opt) cfg.restarts = *restarts_opt;
      cfg.validate();
      const auto ring_json = io::parse(io::read_text(ring_path, in), ring_path);
      const auto r = io::ring_from_json(ring_json);
      const Json config{{"ring", ring_path == "-" ? "<stdin>" : ring_path}, {"search", io::to_json(cfg)}};
      const auto v = validate(r);
      if (!v.valid) {
        sink.write(dump(envelope("obstruct check", config,
                                 Json{{"verdict", "InvalidRing"}, {"axiom", v.axiom}, {"detail", v.detail}})));
        return kFailed;
      }
      const auto report = verdict(r, cfg);
      sink.write(dump(envelope("obstruct check", config, io::to_json(report))));
      return report.verdict == Verdict::Obstructed ? kFailed : kOk;
    }
    if ((*classify && want_table) || *table) {
      const auto t = generate_table();
      const auto text = render_table(t);
      if (format == "text") {
        sink.write(text);
      } else {
        sink.write(dump(envelope("classify --table", Json{{"format", format}},
                                 Json{{"cells", io::to_json(t)}, {"text", text}})));
      }
      return kOk;
    }
    if (*classify) {
      if (classify_input.empty()) throw io::InputError("", "classify needs a form file or --table");
      const Json config{{"form", classify_input == "-" ? "<stdin>" : classify_input}};
      const auto m = io::form_from_json(io::parse(io::read_text(classify_input, in), classify_input));
      Json result;
      int code = kOk;
      try {
        const IntersectionForm f(m);
        result = Json{{"rank", f.rank()},           {"beta_plus", f.beta_plus()},
                      {"beta_minus", f.beta_minus()}, {"signature", f.signature()},
                      {"parity", f.is_even() ? "even" : "odd"}, {"determinant", f.determinant()}};
        const auto d = qre_ellipticity_decision(f);
        result["elliptic"] = d.elliptic;
        result["homeo"] = d.homeo ? io::to_json(*d.homeo) : io::to_json(classify_simply_connected(f));
        if (!d.elliptic) code = kFailed;
      } catch (const FormError& e) {
        result = Json{{"error", "FormError"}, {"message", e.what()}, {"witness", e.witness()}};
        code = kFailed;
      } catch (const ClassificationError& e) {
        result = Json{{"error", "ClassificationError"}, {"message", e.what()}};
        code = kFailed;
      }
      if (format == "text") {
        sink.write(result.contains("homeo") ? result["homeo"]["name"].get<std::string>() + "\n"
                                            : std::string(result["message"].get<std::string>()) + "\n");
      } else {
        sink.write(dump(envelope("classify", config, result)));
      }
      return code;
    }
    if (*lab_run) {
      const auto js = parse_int_list(js_text);
      auto battery = lab::default_battery();
      if (!battery_path.empty()) battery = io::battery_from_json(io::parse(io::read_text(battery_path, in), battery_path));
      for (auto& f : battery) f.center.resize(lab_n, 0.0);
      for (int j : js)
        if (j < 1) throw io::InputError("", "family indices must be positive");
      const auto rep = lab::vague_convergence_report(lab_n, js, battery, quad);
      Json config{{"n", lab_n}, {"j", js}, {"grid", quad.grid}, {"samples", quad.samples}, {"seed", quad.seed}};
      Json bj = Json::array();
      for (const auto& f : battery) bj.push_back(io::to_json(f));
      config["battery"] = bj;
      const Json doc = envelope("measure-lab run", config, io::to_json(rep));
      if (lab_format == "json") {
        sink.write(dump(doc));
      } else {
        sink.write(io::measure_csv(rep));
        // the CSV stays plot-ready; config and per-ball data go to a sidecar
        if (!out_path.empty() && out_path != "-") Output{out_path + ".json", &out}.write(dump(doc));
      }
      return kOk;
    }
    if (*verify) {
      if (pb_n != 2 && pb_n != 3) throw io::InputError("", "--n must be 2 or 3");
      if (jmax < 1 || jmax > 30) throw io::InputError("", "--jmax must lie in [1, 30]");
      if (pb_case == "exact-decay" && pb_n == 3 && jmax > 4)
        throw io::InputError("", "exact-decay with n = 3 supports --jmax <= 4");
      bool pass = false;
      Json result;
      if (pb_case == "invariance") result = pullback_invariance(pb_n, pb_seed, &pass);
      else if (pb_case == "rotated") result = pullback_rotated(pb_n, jmax, turns, pb_seed, &pass);
      else if (pb_case == "norm-bound") result = pullback_norm_bound(pb_n, &pass);
      else result = pullback_exact_decay(pb_n, jmax, &pass);
      result["pass"] = pass;
      const Json config{{"case", pb_case}, {"n", pb_n}, {"jmax", jmax}, {"turns", turns}, {"seed", pb_seed},
                        {"torus_period", "2 pi"}};
      sink.write(dump(envelope("pullback verify", config, result)));
      return pass ? kOk : kFailed;
    }
  } catch (const io::InputError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace qre::cli
