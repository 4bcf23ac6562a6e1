#pragma once

// JSON state files and JSON renderings of reports, certificates and POVM results.

#include "coa/assist.hpp"
#include "coa/povm.hpp"
#include "coa/state.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace coa {

using json = nlohmann::json;

/// Malformed input file (bad JSON, wrong shape, bad values).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StateFile {
  FourQubitPure state;
  std::optional<std::string> label;
};

inline constexpr double kStateFileNormTol = 1e-6;

namespace detail {

inline double finite_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError(where + ": non-finite value");
  return d;
}

inline cplx parse_complex(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2) throw ParseError(where + ": expected [re, im]");
  return {finite_number(v[0], where + "[0]"), finite_number(v[1], where + "[1]")};
}

}  // namespace detail

inline json complex_to_json(cplx z) { return json::array({z.real(), z.imag()}); }

template <class M>
json matrix_to_json(const M& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(cplx(m(r, c))));
    rows.push_back(row);
  }
  return rows;
}

inline Mat2 mat2_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ParseError(where + ": expected a 2x2 array");
  Mat2 m;
  for (int r = 0; r < 2; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != 2) throw ParseError(where + ": expected a 2x2 array");
    for (int c = 0; c < 2; ++c)
      m(r, c) = detail::parse_complex(row[static_cast<std::size_t>(c)], where + "[" + std::to_string(r) + "][" +
                                                                           std::to_string(c) + "]");
  }
  return m;
}

inline json optional_number(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---- state files ----

inline StateFile parse_state_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("state file: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("state file: top level must be an object");
  if (!j.contains("amplitudes")) throw ParseError("state file: missing key \"amplitudes\"");
  const json& a = j["amplitudes"];
  if (!a.is_array()) throw ParseError("state file: \"amplitudes\" must be an array");
  if (a.size() != 16) throw ParseError("state file: expected 16 amplitudes, got " + std::to_string(a.size()));
  Amplitudes amps;
  for (std::size_t i = 0; i < 16; ++i)
    amps(static_cast<Eigen::Index>(i)) = detail::parse_complex(a[i], "amplitudes[" + std::to_string(i) + "]");
  const double n = amps.norm();
  if (std::abs(n - 1.0) > kStateFileNormTol) {
    std::ostringstream os;
    os.precision(17);
    os << "state file: norm " << n << " deviates from 1 by more than " << kStateFileNormTol;
    throw ParseError(os.str());
  }
  StateFile out{FourQubitPure(amps, kStateFileNormTol), std::nullopt};
  if (j.contains("label")) {
    if (!j["label"].is_string()) throw ParseError("state file: \"label\" must be a string");
    out.label = j["label"].get<std::string>();
  }
  return out;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline StateFile read_state_file(const std::string& path) { return parse_state_json(read_text(path)); }

inline json state_to_json(const FourQubitPure& psi, const std::optional<std::string>& label = std::nullopt) {
  json amps = json::array();
  for (int i = 0; i < 16; ++i) amps.push_back(complex_to_json(psi[i]));
  json j{{"amplitudes", amps}};
  if (label) j["label"] = *label;
  return j;
}

// ---- reports ----

inline json basis_to_json(const LocalBasis& b) { return {{"w_c", matrix_to_json(b.w_c)}, {"w_d", matrix_to_json(b.w_d)}}; }

inline json report_to_json(const Report& r) {
  return {{"csharp", r.csharp},
          {"cflat", r.cflat},
          {"relative_gain", finite_or_null(r.relative_gain)},
          {"rank_class", r.rank_class},
          {"verdict", to_string(r.verdict)},
          {"phi", optional_number(r.phi)},
          {"pattern_residual", optional_number(r.pattern_residual)},
          {"basis", basis_to_json(r.basis)}};
}

inline Verdict parse_verdict(const std::string& s) {
  for (Verdict v : {Verdict::local_sufficient, Verdict::local_insufficient, Verdict::always_local})
    if (to_string(v) == s) return v;
  throw ParseError("unknown verdict '" + s + "'");
}

inline Report report_from_json(const json& j) {
  try {
    Report r;
    r.csharp = j.at("csharp").get<double>();
    r.cflat = j.at("cflat").get<double>();
    const json& g = j.at("relative_gain");
    r.relative_gain = g.is_null() ? std::numeric_limits<double>::infinity() : g.get<double>();
    r.rank_class = j.at("rank_class").get<int>();
    r.verdict = parse_verdict(j.at("verdict").get<std::string>());
    if (!j.at("phi").is_null()) r.phi = j["phi"].get<double>();
    if (!j.at("pattern_residual").is_null()) r.pattern_residual = j["pattern_residual"].get<double>();
    r.basis.w_c = mat2_from_json(j.at("basis").at("w_c"), "basis.w_c");
    r.basis.w_d = mat2_from_json(j.at("basis").at("w_d"), "basis.w_d");
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

inline json certificate_to_json(const LocalityCertificate& c) {
  json sigma = json::array();
  for (int k = 0; k < 4; ++k) sigma.push_back(c.sigma(k));
  json out{{"rank_class", c.rank_class},
           {"sigma", sigma},
           {"verdict", to_string(c.verdict)},
           {"phi", optional_number(c.phi)},
           {"pattern_residual", optional_number(c.pattern_residual)}};
  if (c.f_phases) {
    json ph = json::array();
    for (int k = 0; k < 4; ++k) ph.push_back((*c.f_phases)(k));
    out["f_phases"] = ph;
  } else {
    out["f_phases"] = nullptr;
  }
  out["basis"] = c.local_basis ? basis_to_json(*c.local_basis) : json(nullptr);
  out["basis_value"] = optional_number(c.basis_value);
  return out;
}

inline json povm_to_json(const PovmResult& r) {
  json elems = json::array();
  for (const Mat2& e : r.povm.elements()) elems.push_back(matrix_to_json(e));
  return {{"party", to_string(r.party)},
          {"value", r.value},
          {"cflat", r.cflat},
          {"csharp", r.csharp},
          {"gain_over_cflat", r.value - r.cflat},
          {"lower_bound", true},
          {"elements", elems}};
}

inline Povm4 povm_from_json(const json& j) {
  if (!j.contains("elements") || !j["elements"].is_array() || j["elements"].size() != 4)
    throw ParseError("povm: expected four elements");
  std::array<Mat2, 4> e;
  for (std::size_t k = 0; k < 4; ++k) e[k] = mat2_from_json(j["elements"][k], "elements[" + std::to_string(k) + "]");
  try {
    return Povm4(e);
  } catch (const NumericError& ex) {
    throw ParseError(ex.what());
  }
}

}  // namespace coa
