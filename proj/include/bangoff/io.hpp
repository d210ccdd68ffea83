#pragma once

// System definition files, CSV tables, JSON summaries and SVG renderings.
// Every emitted artifact carries the hash of the configuration behind it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bangoff/analysis.hpp"
#include "bangoff/controls.hpp"
#include "bangoff/errors.hpp"
#include "bangoff/model.hpp"
#include "bangoff/optimize.hpp"
#include "bangoff/speed_limit.hpp"

namespace bangoff::io {

using json = nlohmann::ordered_json;

/// Shortest round-trip text for a double.
inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int p = 15; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

/// FNV-1a over the canonical (sorted-key, compact) dump, as 16 hex digits.
inline std::string config_hash(const json& config) {
  const std::string text = nlohmann::json(config).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) h = (h ^ c) * 1099511628211ULL;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------- system files

namespace detail {

inline double number_field(const json& j, const char* key, double fallback, bool required) {
  if (!j.contains(key)) {
    if (required) throw invalid_input(std::string("system file: missing field '") + key + "'");
    return fallback;
  }
  if (!j.at(key).is_number()) throw invalid_input(std::string("system file: field '") + key + "' must be a number");
  return j.at(key).get<double>();
}

inline StateVector parse_state(const json& j, std::size_t n) {
  if (!j.is_array() || j.size() != n) throw invalid_input("system file: 'target' must list one amplitude per level");
  std::vector<cplx> a;
  for (const auto& e : j) {
    if (e.is_number()) {
      a.emplace_back(e.get<double>(), 0.0);
    } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
      a.emplace_back(e[0].get<double>(), e[1].get<double>());
    } else {
      throw invalid_input("system file: amplitudes are numbers or [re, im] pairs");
    }
  }
  return StateVector(std::move(a));
}

}  // namespace detail

inline ControlSystem parse_system(const json& j) {
  if (!j.is_object()) throw invalid_input("system file: expected an object");
  if (!j.contains("kind") || !j.at("kind").is_string()) throw invalid_input("system file: missing 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "two_level") {
    const double E = detail::number_field(j, "E", 0.0, true);
    const double M = detail::number_field(j, "M", 0.0, true);
    const StateVector target = j.contains("target") ? detail::parse_state(j.at("target"), 2) : StateVector::basis(2, 1);
    return two_level(E, M, target);
  }
  if (kind == "three_level") {
    const double E = detail::number_field(j, "E", 0.0, true);
    const double M = detail::number_field(j, "M", 0.0, true);
    const double mu1 = detail::number_field(j, "mu1", 0.0, true);
    const double mu2 = detail::number_field(j, "mu2", 0.0, true);
    ControlSystem s = three_level(E, mu1, mu2, M);
    if (j.contains("target")) s.target = detail::parse_state(j.at("target"), 3);
    return s;
  }
  throw invalid_input("system file: unknown kind '" + kind + "'");
}

inline ControlSystem load_system(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw invalid_input("cannot read system file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw invalid_input(std::string("system file is not valid JSON: ") + e.what());
  }
  return parse_system(j);
}

inline json state_json(const StateVector& s) {
  json a = json::array();
  for (std::size_t i = 0; i < s.size(); ++i) a.push_back({s[i].real(), s[i].imag()});
  return a;
}

inline json system_json(const ControlSystem& s) {
  json j;
  j["kind"] = to_string(s.params.kind);
  j["E"] = s.params.E;
  j["M"] = s.bound;
  if (s.params.kind == SystemKind::three_level) {
    j["mu1"] = s.params.mu1;
    j["mu2"] = s.params.mu2;
  }
  j["target"] = state_json(s.target);
  return j;
}

// ---------------------------------------------------------------- documents

inline json control_json(const BangOffControl& c) {
  return json{{"type", c.type.str()}, {"durations", c.durations}, {"amplitude", c.amplitude}};
}

inline json control_json(const PiecewiseControl& c) { return json{{"dt", c.dt}, {"values", c.values}}; }

inline json control_json(const CrabControl& c) {
  json coef = json::array();
  for (auto [a, b] : c.coefficients) coef.push_back({a, b});
  return json{{"coefficients", coef}, {"frequencies", c.frequencies}, {"T", c.T}, {"M", c.M}};
}

template <class Control>
json result_json(const OptimizationResult<Control>& r) {
  return json{{"control", control_json(r.best_control)},
              {"fidelity", r.best_fidelity},
              {"infidelity", 1.0 - r.best_fidelity},
              {"seed", r.seed},
              {"iterations", r.iterations_used},
              {"converged", r.converged}};
}

inline json qsl_json(const QslReport& r) {
  json levels = json::array();
  for (const auto& l : r.levels) {
    json w = json::array();
    for (const auto& c : l.witnesses) w.push_back(control_json(c));
    json e{{"Ns", l.n_s}, {"feasible", l.feasible}};
    if (l.feasible) e["T_min"] = l.T_min;
    e["witnesses"] = w;
    levels.push_back(e);
  }
  json types = json::array();
  for (std::size_t i = 0; i < r.optimal_types.size(); ++i)
    types.push_back(json{{"type", r.optimal_types[i].str()}, {"durations", r.optimal_durations[i]}});
  return json{{"qsl_estimate", r.qsl_estimate}, {"Ns", r.n_s},        {"converged", r.converged},
              {"delta", r.delta},               {"tol", r.tol},        {"optimal", types},
              {"levels", levels}};
}

inline json critical_time_json(const CriticalTimeReport& r) {
  return json{{"T_c", r.T_c}, {"epsilon", r.epsilon}, {"bracket", {r.low, r.high}}, {"probes", r.probes}};
}

/// Summary document: {"config_hash", "config", "result"}.
inline json summary(const json& config, json result) {
  return json{{"config_hash", config_hash(config)}, {"config", config}, {"result", std::move(result)}};
}

// ---------------------------------------------------------------- CSV

inline void csv_header(std::ostream& os, const std::string& hash, const char* columns) {
  os << "# config_hash=" << hash << '\n' << columns << '\n';
}

/// t,u at the slot midpoints of a piecewise rendering.
template <class Control>
void write_control_csv(std::ostream& os, const Control& c, std::size_t n_slots, const std::string& hash) {
  const PiecewiseControl p = to_piecewise(c, n_slots);
  csv_header(os, hash, "t,u");
  for (std::size_t k = 0; k < p.values.size(); ++k)
    os << num((static_cast<double>(k) + 0.5) * p.dt) << ',' << num(p.values[k]) << '\n';
}

inline void write_control_csv(std::ostream& os, const PiecewiseControl& p, const std::string& hash) {
  csv_header(os, hash, "t,u");
  for (std::size_t k = 0; k < p.values.size(); ++k)
    os << num((static_cast<double>(k) + 0.5) * p.dt) << ',' << num(p.values[k]) << '\n';
}

template <class Control>
void write_trace_csv(std::ostream& os, const std::vector<OptimizationResult<Control>>& runs, const std::string& hash) {
  csv_header(os, hash, "point_id,iteration,d_B");
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (const auto& p : runs[i].trace) os << i << ',' << p.iteration << ',' << num(p.bures) << '\n';
}

inline void write_landscape_csv(std::ostream& os, const LandscapeGrid& g, const std::string& hash) {
  csv_header(os, hash, "t1,t2,value");
  for (std::size_t i = 0; i < g.axis1.n; ++i)
    for (std::size_t j = 0; j < g.axis2.n; ++j)
      if (g.feasible(i, j)) os << num(g.axis1.at(i)) << ',' << num(g.axis2.at(j)) << ',' << num(g(i, j)) << '\n';
}

inline void write_robustness_csv(std::ostream& os, const std::vector<RobustnessStats>& v, const std::string& hash) {
  csv_header(os, hash, "sigma,mode,mean_error,std_error,n");
  for (const auto& s : v)
    os << num(s.sigma) << ',' << to_string(s.mode) << ',' << num(s.mean_error) << ',' << num(s.std_error) << ','
       << s.n_samples << '\n';
}

inline void write_distance_csv(std::ostream& os, const DistanceReport& r, const std::string& hash) {
  csv_header(os, hash, "i,j,D");
  for (const auto& p : r.pairs) os << p.i << ',' << p.j << ',' << num(p.D) << '\n';
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& v, const std::string& hash) {
  csv_header(os, hash, "T,best_F,best_type");
  for (const auto& p : v) os << num(p.T) << ',' << num(p.fidelity) << ',' << p.type.str() << '\n';
}

// ---------------------------------------------------------------- SVG

namespace detail {

// Viridis-like ramp, t in [0, 1].
inline std::string ramp(double t) {
  static const double stops[5][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int k = std::min(3, static_cast<int>(t));
  const double f = t - k;
  char buf[8];
  int c[3];
  for (int i = 0; i < 3; ++i) c[i] = static_cast<int>(std::lround(stops[k][i] + f * (stops[k + 1][i] - stops[k][i])));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

}  // namespace detail

inline void write_heatmap_svg(std::ostream& os, const LandscapeGrid& g, const std::string& hash) {
  const double W = 480, H = 480, pad = 40;
  double lo = INFINITY, hi = -INFINITY;
  for (double v : g.values)
    if (!std::isnan(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!(hi > lo)) hi = lo + 1.0;
  const double cw = (W - 2 * pad) / static_cast<double>(g.axis1.n);
  const double ch = (H - 2 * pad) / static_cast<double>(g.axis2.n);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<!-- config_hash=" << hash << " -->\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < g.axis1.n; ++i)
    for (std::size_t j = 0; j < g.axis2.n; ++j) {
      if (!g.feasible(i, j)) continue;
      const double x = pad + cw * static_cast<double>(i);
      const double y = H - pad - ch * static_cast<double>(j + 1);
      os << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(cw + 0.05) << "\" height=\""
         << num(ch + 0.05) << "\" fill=\"" << detail::ramp((g(i, j) - lo) / (hi - lo)) << "\"/>\n";
    }
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 10 << "\" font-size=\"12\" text-anchor=\"middle\">t1 ["
     << num(g.axis1.lo) << ", " << num(g.axis1.hi) << "]</text>\n";
  os << "<text x=\"12\" y=\"" << H / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 " << H / 2
     << ")\" text-anchor=\"middle\">t2 [" << num(g.axis2.lo) << ", " << num(g.axis2.hi) << "]</text>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" font-size=\"12\" text-anchor=\"middle\">"
     << (g.value == LandscapeValue::fidelity ? "F" : "log10 d_B") << " in [" << num(lo) << ", " << num(hi)
     << "]</text>\n";
  os << "</svg>\n";
}

inline void write_step_svg(std::ostream& os, const PiecewiseControl& p, double M, const std::string& hash) {
  const double W = 640, H = 240, pad = 30;
  const double T = p.total();
  auto X = [&](double t) { return pad + (W - 2 * pad) * t / T; };
  auto Y = [&](double u) { return H / 2 - (H / 2 - pad) * u / M; };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<!-- config_hash=" << hash << " -->\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << pad << "\" y1=\"" << H / 2 << "\" x2=\"" << W - pad << "\" y2=\"" << H / 2
     << "\" stroke=\"#bbb\"/>\n";
  os << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"";
  for (std::size_t k = 0; k < p.values.size(); ++k) {
    const double t0 = p.dt * static_cast<double>(k), t1 = t0 + p.dt;
    os << num(X(t0)) << ',' << num(Y(p.values[k])) << ' ' << num(X(t1)) << ',' << num(Y(p.values[k])) << ' ';
  }
  os << "\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 6 << "\" font-size=\"12\" text-anchor=\"middle\">t in [0, "
     << num(T) << "], |u| &lt;= " << num(M) << "</text>\n";
  os << "</svg>\n";
}

}  // namespace bangoff::io
