// Copyright Contributors to the qre-toolkit Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qre/cohomology_ring.hpp"
#include "qre/exterior_algebra.hpp"
#include "qre/four_manifold.hpp"
#include "qre/measure_lab.hpp"
#include "qre/obstruction.hpp"
#include "qre/pullback.hpp"

namespace qre::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchema = "qre-toolkit/1";

/// Malformed input, with a JSON pointer to the offending field.
class InputError : public std::runtime_error {
 public:
  InputError(std::string pointer, const std::string& what)
      : std::runtime_error(what + " at " + (pointer.empty() ? "/" : pointer)),
        pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

inline std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }
inline std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

inline const Json& field(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw InputError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw InputError(child(path, key), "missing field");
  return *it;
}

inline const Json& array_of(const Json& j, const std::string& path, std::size_t expected = SIZE_MAX) {
  if (!j.is_array()) throw InputError(path, "expected an array");
  if (expected != SIZE_MAX && j.size() != expected)
    throw InputError(path, "expected " + std::to_string(expected) + " entries, got " +
                               std::to_string(j.size()));
  return j;
}

inline std::int64_t as_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw InputError(path, "expected an integer");
  return j.get<std::int64_t>();
}

inline double as_double(const Json& j, const std::string& path) {
  if (!j.is_number()) throw InputError(path, "expected a number");
  return j.get<double>();
}

inline Json parse(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("", source + ": malformed JSON (" + std::string(e.what()) + ")");
  }
}

inline std::string read_text(const std::string& path, std::istream& stdin_stream) {
  if (path == "-") {
    std::ostringstream ss;
    ss << stdin_stream.rdbuf();
    return ss.str();
  }
  std::ifstream in(path);
  if (!in) throw InputError("", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// scalars and multivectors

inline Json to_json(const Rational& q) {
  if (denominator(q) == 1) {
    const BigInt& num = numerator(q);
    if (num >= std::numeric_limits<std::int64_t>::min() && num <= std::numeric_limits<std::int64_t>::max())
      return static_cast<std::int64_t>(num);
  }
  return to_string(q);
}

inline Rational rational_from_json(const Json& j, const std::string& path) {
  if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
  if (j.is_string()) {
    try {
      return parse_rational(j.get<std::string>());
    } catch (const std::exception&) {
      throw InputError(path, "malformed rational '" + j.get<std::string>() + "'");
    }
  }
  throw InputError(path, "expected an integer or a \"p/q\" string");
}

inline Json to_json(const ExactMultivector& m) {
  Json terms = Json::array();
  for (const auto& [b, c] : m.terms()) {
    Json t;
    t["idx"] = b.indices();
    t["num"] = to_json(Rational(numerator(c)));
    t["den"] = to_json(Rational(denominator(c)));
    terms.push_back(t);
  }
  return Json{{"n", m.ambient_dim()}, {"terms", terms}};
}

inline Json to_json(const NumericMultivector& m) {
  Json terms = Json::array();
  for (const auto& [b, c] : m.terms()) terms.push_back(Json{{"idx", b.indices()}, {"val", c}});
  return Json{{"n", m.ambient_dim()}, {"terms", terms}};
}

inline Blade blade_from_json(const Json& j, int n, const std::string& path) {
  array_of(j, path);
  std::vector<int> idx;
  for (std::size_t i = 0; i < j.size(); ++i) idx.push_back(static_cast<int>(as_int(j[i], child(path, i))));
  try {
    return Blade::from_indices(idx, n);
  } catch (const std::exception& e) {
    throw InputError(path, e.what());
  }
}

/// Accepts exact ("num"/"den") and numeric ("val") terms; numeric terms are
/// converted to exact rationals only when they are integers.
inline ExactMultivector exact_multivector_from_json(const Json& j, const std::string& path = "") {
  const auto n = as_int(field(j, "n", path), child(path, "n"));
  if (n < 1 || n > Blade::kMaxDim) throw InputError(child(path, "n"), "dimension out of range");
  ExactMultivector m(static_cast<int>(n));
  const auto& terms = array_of(field(j, "terms", path), child(path, "terms"));
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto p = child(child(path, "terms"), i);
    const Blade b = blade_from_json(field(terms[i], "idx", p), static_cast<int>(n), child(p, "idx"));
    Rational c;
    if (terms[i].contains("val")) {
      const double v = as_double(terms[i]["val"], child(p, "val"));
      if (v != std::floor(v) || std::abs(v) > 9e15)
        throw InputError(child(p, "val"), "numeric coefficient cannot be read exactly");
      c = Rational(static_cast<std::int64_t>(v));
    } else {
      const Rational num = rational_from_json(field(terms[i], "num", p), child(p, "num"));
      const Rational den = terms[i].contains("den") ? rational_from_json(terms[i]["den"], child(p, "den"))
                                                    : Rational(1);
      if (den == 0) throw InputError(child(p, "den"), "zero denominator");
      c = num / den;
    }
    m.add_term(b, m.coefficient(b) + c);
  }
  return m;
}

inline NumericMultivector numeric_multivector_from_json(const Json& j, const std::string& path = "") {
  const auto n = as_int(field(j, "n", path), child(path, "n"));
  if (n < 1 || n > Blade::kMaxDim) throw InputError(child(path, "n"), "dimension out of range");
  NumericMultivector m(static_cast<int>(n));
  const auto& terms = array_of(field(j, "terms", path), child(path, "terms"));
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto p = child(child(path, "terms"), i);
    const Blade b = blade_from_json(field(terms[i], "idx", p), static_cast<int>(n), child(p, "idx"));
    double c;
    if (terms[i].contains("val")) {
      c = as_double(terms[i]["val"], child(p, "val"));
    } else {
      const Rational num = rational_from_json(field(terms[i], "num", p), child(p, "num"));
      const Rational den = terms[i].contains("den") ? rational_from_json(terms[i]["den"], child(p, "den"))
                                                    : Rational(1);
      if (den == 0) throw InputError(child(p, "den"), "zero denominator");
      c = to_double(num / den);
    }
    m.add_term(b, m.coefficient(b) + c);
  }
  return m;
}

// ---------------------------------------------------------------------------
// rings

inline Json to_json(const RingPresentation& r) {
  const int n = r.formal_dim();
  Json sc = Json::array();
  for (int j = 0; j <= n; ++j) {
    Json row = Json::array();
    for (int k = 0; j + k <= n; ++k) {
      Json ta = Json::array();
      for (int a = 0; a < r.betti(j); ++a) {
        Json tb = Json::array();
        for (int b = 0; b < r.betti(k); ++b) {
          Json tc = Json::array();
          for (int c = 0; c < r.betti(j + k); ++c) tc.push_back(to_json(r.sc(j, k, a, b, c)));
          tb.push_back(tc);
        }
        ta.push_back(tb);
      }
      row.push_back(ta);
    }
    sc.push_back(row);
  }
  Json fundamental = Json::array();
  for (const auto& f : r.fundamental()) fundamental.push_back(to_json(f));
  return Json{{"n", n}, {"betti", r.betti()}, {"labels", r.labels()}, {"sc", sc}, {"fundamental", fundamental}};
}

/// Parses and validates a ring; structural errors carry a JSON pointer.
inline RingPresentation ring_from_json(const Json& j, const std::string& path = "") {
  const auto n = as_int(field(j, "n", path), child(path, "n"));
  if (n < 1 || n > 32) throw InputError(child(path, "n"), "formal dimension out of range");
  const auto& bj = array_of(field(j, "betti", path), child(path, "betti"), static_cast<std::size_t>(n + 1));
  std::vector<int> betti;
  for (std::size_t i = 0; i < bj.size(); ++i) {
    const auto b = as_int(bj[i], child(child(path, "betti"), i));
    if (b < 0 || b > 10000) throw InputError(child(child(path, "betti"), i), "betti number out of range");
    betti.push_back(static_cast<int>(b));
  }
  RingPresentation r(static_cast<int>(n), betti);
  if (j.contains("labels")) {
    const auto lp = child(path, "labels");
    const auto& lj = array_of(j["labels"], lp, betti.size());
    for (std::size_t k = 0; k < lj.size(); ++k) {
      array_of(lj[k], child(lp, k), static_cast<std::size_t>(betti[k]));
      for (std::size_t a = 0; a < lj[k].size(); ++a) {
        if (!lj[k][a].is_string()) throw InputError(child(child(lp, k), a), "expected a string");
        r.labels()[k][a] = lj[k][a].get<std::string>();
      }
    }
  }
  const auto sp = child(path, "sc");
  const auto& sc = array_of(field(j, "sc", path), sp, static_cast<std::size_t>(n + 1));
  for (int dj = 0; dj <= n; ++dj) {
    const auto pj = child(sp, dj);
    const auto& row = array_of(sc[dj], pj, static_cast<std::size_t>(n - dj + 1));
    for (int dk = 0; dj + dk <= n; ++dk) {
      const auto pk = child(pj, dk);
      const auto& ta = array_of(row[dk], pk, static_cast<std::size_t>(betti[dj]));
      for (int a = 0; a < betti[dj]; ++a) {
        const auto pa = child(pk, a);
        const auto& tb = array_of(ta[a], pa, static_cast<std::size_t>(betti[dk]));
        for (int b = 0; b < betti[dk]; ++b) {
          const auto pb = child(pa, b);
          const auto& tc = array_of(tb[b], pb, static_cast<std::size_t>(betti[dj + dk]));
          for (int c = 0; c < betti[dj + dk]; ++c)
            r.sc(dj, dk, a, b, c) = rational_from_json(tc[c], child(pb, c));
        }
      }
    }
  }
  const auto fp = child(path, "fundamental");
  const auto& fj = array_of(field(j, "fundamental", path), fp, static_cast<std::size_t>(betti[n]));
  for (std::size_t c = 0; c < fj.size(); ++c) r.fundamental()[c] = rational_from_json(fj[c], child(fp, c));
  return r;
}

// ---------------------------------------------------------------------------
// obstruction reports

inline Json to_json(const Certificate& cert) {
  return std::visit(
      [](const auto& c) -> Json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return nullptr;
        } else if constexpr (std::is_same_v<T, BettiCertificate>) {
          return Json{{"kind", "betti"}, {"degree", c.degree}, {"betti", c.betti}, {"bound", c.bound}};
        } else if constexpr (std::is_same_v<T, ExteriorPowerCertificate>) {
          Json kv = Json::array();
          for (const auto& v : c.kernel_vector) kv.push_back(to_json(v));
          return Json{{"kind", "exterior_power"}, {"degree", c.degree}, {"rank", c.rank},
                      {"subsets", c.subsets}, {"kernel_vector", kv}};
        } else {
          Json diag = Json::array();
          for (const auto& v : c.diagonal) diag.push_back(to_json(v));
          return Json{{"kind", "definiteness"}, {"positive", c.positive}, {"negative", c.negative},
                      {"bound", c.bound}, {"diagonal", diag}};
        }
      },
      cert);
}

inline Json to_json(const CheckResult& c) {
  return Json{{"name", c.name},           {"applicable", c.applicable},
              {"passed", c.passed},       {"derived", c.derived},
              {"summary", c.summary},     {"certificate", to_json(c.certificate)}};
}

inline Json to_json(const SearchConfig& c) {
  return Json{{"restarts", c.restarts},         {"max_iters", c.max_iters},
              {"tol_residual", c.tol_residual}, {"tol_injectivity", c.tol_injectivity},
              {"seed", c.seed}};
}

inline SearchConfig search_config_from_json(const Json& j, SearchConfig base = {}) {
  if (!j.is_object()) throw InputError("", "config must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = it.key(), p = "/" + key;
    if (key == "restarts") base.restarts = static_cast<int>(as_int(*it, p));
    else if (key == "max_iters") base.max_iters = static_cast<int>(as_int(*it, p));
    else if (key == "tol_residual") base.tol_residual = as_double(*it, p);
    else if (key == "tol_injectivity") base.tol_injectivity = as_double(*it, p);
    else if (key == "seed") {
      if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0))
        throw InputError(p, "expected a non-negative integer");
      base.seed = it->get<std::uint64_t>();
    } else throw InputError(p, "unknown config field");
  }
  try {
    base.validate();
  } catch (const std::exception& e) {
    throw InputError("", e.what());
  }
  return base;
}

inline Json to_json(const ObstructionReport& r) {
  Json checks = Json::array();
  for (const auto& c : r.checks) checks.push_back(to_json(c));
  Json out{{"verdict", to_string(r.verdict)}, {"obstructing_check", r.obstructing_check}, {"checks", checks}};
  if (r.witness) {
    Json images = Json::array();
    for (const auto& deg : r.witness->images) {
      Json row = Json::array();
      for (const auto& m : deg) row.push_back(to_json(m));
      images.push_back(row);
    }
    out["witness"] = Json{{"residual", r.witness->residual},
                          {"injectivity_margins", r.witness->injectivity_margins},
                          {"images", images}};
  } else {
    out["witness"] = nullptr;
  }
  if (r.search_stats)
    out["search"] = Json{{"restarts_run", r.search_stats->restarts_run},
                         {"best_restart", r.search_stats->best_restart},
                         {"best_residual", r.search_stats->best_residual},
                         {"best_margins", r.search_stats->best_margins}};
  out["notes"] = r.notes;
  return out;
}

// ---------------------------------------------------------------------------
// forms and classification

inline IntMatrix form_from_json(const Json& j) {
  const Json* m = &j;
  std::string path;
  if (j.is_object()) {
    m = &field(j, "form", "");
    path = "/form";
  }
  array_of(*m, path);
  IntMatrix out;
  for (std::size_t r = 0; r < m->size(); ++r) {
    const auto pr = child(path, r);
    array_of((*m)[r], pr, m->size());
    std::vector<std::int64_t> row;
    for (std::size_t c = 0; c < (*m)[r].size(); ++c) {
      const auto v = as_int((*m)[r][c], child(pr, c));
      if (v < -(1LL << 40) || v > (1LL << 40)) throw InputError(child(pr, c), "entry out of range");
      row.push_back(v);
    }
    out.push_back(row);
  }
  return out;
}

inline Json to_json(const HomeoType& h) {
  static const char* kinds[] = {"Sphere4", "SumS2xS2", "SumCP2", "OutsideSupportedRegime"};
  Json out{{"kind", kinds[static_cast<int>(h.kind)]}, {"name", h.name()}};
  if (h.kind == HomeoType::Kind::SumS2xS2) out["k"] = h.k;
  if (h.kind == HomeoType::Kind::SumCP2) {
    out["j"] = h.j;
    out["i"] = h.i;
  }
  if (!h.reason.empty()) out["reason"] = h.reason;
  return out;
}

inline Json to_json(const ClassificationTable& t) {
  Json cells = Json::array();
  for (int minus = 0; minus <= kMaxDefinite; ++minus)
    for (int plus = 0; plus <= kMaxDefinite; ++plus) {
      Json entries = Json::array();
      for (const auto& h : t[minus][plus]) entries.push_back(h.name());
      cells.push_back(Json{{"beta_plus", plus}, {"beta_minus", minus}, {"entries", entries}});
    }
  return cells;
}

// ---------------------------------------------------------------------------
// measure lab

inline lab::TestFunction test_function_from_json(const Json& j, const std::string& path) {
  lab::TestFunction f;
  const auto& type = field(j, "type", path);
  if (!type.is_string()) throw InputError(child(path, "type"), "expected a string");
  const auto t = type.get<std::string>();
  if (t == "bump") f.type = lab::TestFunction::Type::Bump;
  else if (t == "cutoff") f.type = lab::TestFunction::Type::Cutoff;
  else throw InputError(child(path, "type"), "unknown test function type '" + t + "'");
  const auto& c = array_of(field(j, "center", path), child(path, "center"));
  for (std::size_t i = 0; i < c.size(); ++i) f.center.push_back(as_double(c[i], child(child(path, "center"), i)));
  f.radius = as_double(field(j, "radius", path), child(path, "radius"));
  if (j.contains("width")) f.width = as_double(j["width"], child(path, "width"));
  if (j.contains("id")) {
    if (!j["id"].is_string()) throw InputError(child(path, "id"), "expected a string");
    f.id = j["id"].get<std::string>();
  }
  return f;
}

inline std::vector<lab::TestFunction> battery_from_json(const Json& j) {
  const Json& arr = j.is_object() ? field(j, "functions", "") : j;
  const std::string base = j.is_object() ? "/functions" : "";
  array_of(arr, base);
  std::vector<lab::TestFunction> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(test_function_from_json(arr[i], child(base, i)));
    if (out.back().id.empty()) out.back().id = "psi" + std::to_string(i + 1);
  }
  return out;
}

inline Json to_json(const lab::TestFunction& f) {
  Json out{{"id", f.id},
           {"type", f.type == lab::TestFunction::Type::Bump ? "bump" : "cutoff"},
           {"center", f.center},
           {"radius", f.radius}};
  if (f.type == lab::TestFunction::Type::Cutoff) out["width"] = f.width;
  return out;
}

inline std::string measure_csv(const lab::MeasureReport& rep) {
  std::ostringstream out;
  out.precision(17);
  out << "j,A,total,doubling_ratio,K_est,psi_id,I_j,target,abs_err\n";
  for (const auto& r : rep.records)
    for (const auto& p : r.psi)
      out << r.j << ',' << r.A << ',' << r.total << ',' << r.doubling_ratio << ',' << r.K_est << ','
          << p.id << ',' << p.integral << ',' << p.target << ',' << p.abs_err << '\n';
  return out.str();
}

inline Json to_json(const lab::MeasureReport& rep) {
  Json records = Json::array();
  for (const auto& r : rep.records) {
    Json psi = Json::array();
    for (const auto& p : r.psi)
      psi.push_back(Json{{"id", p.id}, {"I_j", p.integral}, {"target", p.target}, {"abs_err", p.abs_err}});
    records.push_back(Json{{"j", r.j},
                           {"A", r.A},
                           {"A_error_estimate", r.A_error},
                           {"total", r.total},
                           {"total_error_estimate", r.total_error},
                           {"doubling_ratio", r.doubling_ratio},
                           {"K_est", r.K_est},
                           {"outside_fraction", r.outside_fraction},
                           {"ball_mass", r.ball_mass},
                           {"ball_target", r.ball_target},
                           {"max_ball_rel_err", r.max_ball_rel_err},
                           {"min_jacobian", r.min_jacobian},
                           {"negative_jacobian_samples", r.negative_samples},
                           {"max_psi_err", r.max_psi_err},
                           {"psi", psi}});
  }
  Json battery = Json::array();
  for (const auto& f : rep.battery) battery.push_back(to_json(f));
  return Json{{"n", rep.n}, {"battery", battery}, {"records", records}};
}

}  // namespace qre::io
