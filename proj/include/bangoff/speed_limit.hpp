#pragma once

// Minimal-duration search over switch counts, the resulting speed-limit
// estimate, the critical time below which one bang is optimal, and a
// brute-force simplex grid used as an oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "bangoff/controls.hpp"
#include "bangoff/errors.hpp"
#include "bangoff/objective.hpp"
#include "bangoff/optimize.hpp"
#include "bangoff/parallel.hpp"
#include "bangoff/random.hpp"

namespace bangoff {

inline constexpr double kDefaultDelta = 1e-9;

/// Work spent on one best_fidelity_at probe.
struct Budget {
  int starts = 20;            // SD starting points per type
  int sd_iterations = 2000;   // per start
  bool polish = true;         // quasi-Newton from every SD endpoint
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::optional<PruningRules> pruning;  // default_pruning(system) when empty
};

struct TypeOptimum {
  BangOffType type;
  std::vector<double> durations;
  double fidelity = 0.0;
};

struct ProbeResult {
  double T = 0.0;
  double fidelity = 0.0;
  BangOffControl control;
  std::vector<TypeOptimum> per_type;  // enumeration order
};

namespace detail {

inline PruningRules pruning_for(const ControlSystem& system, const Budget& b) {
  return b.pruning ? *b.pruning : default_pruning(system);
}

inline std::uint64_t word_hash(const BangOffType& t) {
  std::uint64_t h = 1469598103934665603ULL;
  for (Symbol s : t.symbols()) h = (h ^ (static_cast<std::uint64_t>(s) + 1)) * 1099511628211ULL;
  return h;
}

}  // namespace detail

/// Best fidelity at fixed T over all (pruned) types with N_s switches.
/// Each type gets `starts` seeded SD runs, each polished by quasi-Newton.
/// Ties go to the lexicographically first type.
inline ProbeResult best_fidelity_at(const ControlSystem& system, std::size_t n_s, double T, const Budget& budget = {},
                                    const std::vector<BangOffType>* types_override = nullptr) {
  validate(system);
  if (!(T > 0.0) || !std::isfinite(T)) throw invalid_input("best_fidelity_at: T must be positive");
  if (budget.starts < 1 || budget.sd_iterations < 1) throw invalid_input("best_fidelity_at: empty budget");
  const auto types = types_override ? *types_override : enumerate_types(n_s, detail::pruning_for(system, budget));
  if (types.empty()) throw invalid_input("best_fidelity_at: no admissible types");
  const BangOffEvaluator ev(system);
  const std::size_t starts = static_cast<std::size_t>(budget.starts);

  struct Run {
    std::vector<double> d;
    double a = 0.0;
  };
  auto runs = parallel_map<Run>(types.size() * starts, budget.threads, [&](std::size_t job) {
    const BangOffType& type = types[job / starts];
    const std::uint64_t seed = derive_seed(derive_seed(budget.seed, detail::word_hash(type)), job % starts);
    Rng rng = make_rng(seed);
    auto start = random_bangoff(type, T, system.bound, rng).durations;
    SdConfig cfg;
    cfg.iterations = budget.sd_iterations;
    cfg.seed = seed;
    auto sd = sd_durations(ev, type, T, std::move(start), system.bound, cfg);
    auto d = sd.best_control.durations;
    if (budget.polish && type.size() > 1) {
      d = quasi_newton(ev, type, T, d, system.bound).best_control.durations;
    }
    return Run{d, ev.modulus(type, d)};
  });

  ProbeResult r;
  r.T = T;
  r.fidelity = -1.0;
  for (std::size_t t = 0; t < types.size(); ++t) {
    std::size_t best = t * starts;
    for (std::size_t s = 1; s < starts; ++s)
      if (runs[t * starts + s].a > runs[best].a) best = t * starts + s;
    TypeOptimum o{types[t], runs[best].d, runs[best].a * runs[best].a};
    r.per_type.push_back(o);
  }
  std::size_t best_t = 0;
  for (std::size_t t = 1; t < r.per_type.size(); ++t) {
    const auto& a = r.per_type[t];
    const auto& b = r.per_type[best_t];
    if (a.fidelity > b.fidelity || (a.fidelity == b.fidelity && a.type < b.type)) best_t = t;
  }
  r.fidelity = r.per_type[best_t].fidelity;
  r.control = BangOffControl{r.per_type[best_t].type, r.per_type[best_t].durations, system.bound};
  return r;
}

// ---------------------------------------------------------------- minimal duration

struct MinDurationResult {
  double T_min = 0.0;
  double lower = 0.0;  // largest probed infeasible T
  std::vector<BangOffControl> witnesses;
  std::vector<double> witness_fidelities;
  int probes = 0;
};

struct MinDurationOptions {
  double delta = kDefaultDelta;
  double tol = 1e-4;
  // After the bisection to `tol`, warm-started quasi-Newton probes narrow
  // the bracket further so witnesses sit at the edge of the feasible set.
  double refine_tol = 1e-9;
  Budget budget;
};

namespace detail {

// Warm start: rescale each witness to T and polish. Returns best per witness type.
inline std::vector<TypeOptimum> warm_probe(const BangOffEvaluator& ev, const ControlSystem& system,
                                           const std::vector<TypeOptimum>& from, double T) {
  std::vector<TypeOptimum> out;
  for (const auto& w : from) {
    std::vector<double> d = w.durations;
    double s = 0.0;
    for (double x : d) s += x;
    for (auto& x : d) x *= T / s;
    if (d.size() > 1) {
      d = quasi_newton(ev, w.type, T, d, system.bound).best_control.durations;
    }
    const double a = ev.modulus(w.type, d);
    out.push_back({w.type, std::move(d), a * a});
  }
  return out;
}

inline std::vector<TypeOptimum> feasible_of(const std::vector<TypeOptimum>& v, double delta) {
  std::vector<TypeOptimum> out;
  for (const auto& o : v)
    if (o.fidelity >= 1.0 - delta) out.push_back(o);
  return out;
}

}  // namespace detail

/// Smallest T in (lo, hi] with best fidelity >= 1 - delta, by bisection.
/// Requires F(lo) < 1 - delta <= F(hi). If the initial state already meets
/// the target, returns T_min = 0 immediately.
inline MinDurationResult min_duration(const ControlSystem& system, std::size_t n_s, double lo, double hi,
                                      const MinDurationOptions& opt = {}) {
  validate(system);
  if (!(opt.delta > 0.0 && opt.delta < 1.0)) throw invalid_input("min_duration: delta must lie in (0, 1)");
  if (!(opt.tol > 0.0)) throw invalid_input("min_duration: tol must be positive");
  MinDurationResult r;
  const double f0 = std::norm(overlap(system.target, system.initial));
  if (f0 >= 1.0 - opt.delta) {
    const auto types = enumerate_types(n_s, detail::pruning_for(system, opt.budget));
    r.T_min = 0.0;
    r.witnesses.push_back(BangOffControl{types.front(), std::vector<double>(types.front().size(), 0.0), system.bound});
    r.witness_fidelities.push_back(f0);
    return r;
  }
  if (!(lo >= 0.0) || !(hi > lo)) throw bracketing_error("min_duration: need 0 <= lo < hi");
  auto feasible = [&](const ProbeResult& p) { return p.fidelity >= 1.0 - opt.delta; };
  ProbeResult top = best_fidelity_at(system, n_s, hi, opt.budget);
  ++r.probes;
  if (!feasible(top)) throw bracketing_error("min_duration: upper end of the bracket is not feasible");
  if (lo > 0.0) {
    ++r.probes;
    if (feasible(best_fidelity_at(system, n_s, lo, opt.budget)))
      throw bracketing_error("min_duration: lower end of the bracket is already feasible");
  }
  while (hi - lo > opt.tol) {
    const double mid = 0.5 * (lo + hi);
    ProbeResult p = best_fidelity_at(system, n_s, mid, opt.budget);
    ++r.probes;
    if (feasible(p)) {
      hi = mid;
      top = std::move(p);
    } else {
      lo = mid;
    }
  }
  const BangOffEvaluator ev(system);
  auto wit = detail::feasible_of(top.per_type, opt.delta);
  while (hi - lo > opt.refine_tol) {
    const double mid = 0.5 * (lo + hi);
    auto w = detail::feasible_of(detail::warm_probe(ev, system, wit, mid), opt.delta);
    ++r.probes;
    if (!w.empty()) {
      hi = mid;
      wit = std::move(w);
    } else {
      lo = mid;
    }
  }
  if (hi < top.T) {
    // A fresh search at the refined edge can reveal further witness types.
    const ProbeResult fresh = best_fidelity_at(system, n_s, hi, opt.budget);
    ++r.probes;
    const auto warm = detail::warm_probe(ev, system, top.per_type, hi);
    std::vector<TypeOptimum> merged;
    for (std::size_t t = 0; t < fresh.per_type.size(); ++t) {
      const auto& a = fresh.per_type[t];
      const auto& b = warm[t];
      merged.push_back(b.fidelity > a.fidelity ? b : a);
    }
    for (const auto& o : wit) {
      auto it = std::find_if(merged.begin(), merged.end(), [&](const TypeOptimum& m) { return m.type == o.type; });
      if (it != merged.end() && o.fidelity > it->fidelity) *it = o;
    }
    wit = detail::feasible_of(merged, opt.delta);
  }
  r.T_min = hi;
  r.lower = lo;
  const bool mirrored = detail::pruning_for(system, opt.budget).mirror_representative;
  std::set<BangOffType> seen;
  for (const auto& o : wit) {
    if (!seen.insert(o.type).second) continue;
    r.witnesses.push_back(BangOffControl{o.type, o.durations, system.bound});
    r.witness_fidelities.push_back(o.fidelity);
  }
  if (mirrored) {
    for (const auto& o : wit) {
      const BangOffType neg = negate(o.type);
      if (!seen.insert(neg).second) continue;
      r.witnesses.push_back(BangOffControl{neg, o.durations, system.bound});
      r.witness_fidelities.push_back(fidelity(system, r.witnesses.back(), hi));
    }
  }
  return r;
}

// ---------------------------------------------------------------- QSL scheme

struct QslOptions {
  double delta = kDefaultDelta;
  std::size_t ns_max = 6;
  double tol = 1e-4;
  double refine_tol = 1e-9;
  double zero_threshold = 1e-6;
  double scan_step = 0.05;
  double T_max = 6.0;
  Budget budget;
};

struct QslLevel {
  std::size_t n_s = 0;
  bool feasible = false;
  double T_min = 0.0;
  std::vector<BangOffControl> witnesses;
};

struct QslReport {
  std::map<std::size_t, double> T_min_by_Ns;  // feasible levels only
  std::vector<QslLevel> levels;
  double qsl_estimate = 0.0;
  std::size_t n_s = 0;
  std::vector<BangOffType> optimal_types;
  std::vector<std::vector<double>> optimal_durations;
  double delta = kDefaultDelta;
  double tol = 1e-4;
  bool converged = false;
};

namespace detail {

// First T in (0, T_hi] with 1 - F <= delta: upward scan, each interior local
// minimum of the infidelity refined by golden section. Returns the
// infeasible/feasible pair bracketing the left edge.
struct EdgeBracket {
  double lo = 0.0;
  double hi = 0.0;
};

inline std::optional<EdgeBracket> scan_for_feasible(const ControlSystem& system, std::size_t n_s, double T_hi,
                                                    bool hi_known_feasible, const QslOptions& opt) {
  auto g = [&](double T) { return 1.0 - best_fidelity_at(system, n_s, T, opt.budget).fidelity; };
  std::vector<double> Ts{0.0}, gs{1.0 - std::norm(overlap(system.target, system.initial))};
  auto golden = [&](double a, double b) -> std::optional<EdgeBracket> {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double g1 = g(x1), g2 = g(x2);
    double left_infeasible = a;
    while (b - a > 1e-10) {
      if (g1 <= opt.delta) return EdgeBracket{left_infeasible, x1};
      if (g2 <= opt.delta) return EdgeBracket{x1, x2};
      if (g1 <= g2) {
        b = x2, x2 = x1, g2 = g1;
        x1 = b - phi * (b - a);
        g1 = g(x1);
      } else {
        left_infeasible = x1;
        a = x1, x1 = x2, g1 = g2;
        x2 = a + phi * (b - a);
        g2 = g(x2);
      }
    }
    return std::nullopt;
  };
  const int n = std::max(1, static_cast<int>(std::ceil(T_hi / opt.scan_step)));
  const double h = T_hi / n;
  for (int j = 1; j <= n; ++j) {
    const double T = h * j;
    const double v = (j == n && hi_known_feasible) ? 0.0 : g(T);
    Ts.push_back(T);
    gs.push_back(v);
    if (v <= opt.delta) return EdgeBracket{Ts[Ts.size() - 2], T};
    const std::size_t m = gs.size();
    if (m >= 3 && gs[m - 2] < gs[m - 3] && gs[m - 2] <= gs[m - 1]) {
      if (auto e = golden(Ts[m - 3], Ts[m - 1])) return e;
    }
  }
  // Minimum at the top end (for example a window just past T_hi).
  const std::size_t m = gs.size();
  if (m >= 2 && gs[m - 1] < gs[m - 2]) {
    if (auto e = golden(Ts[m - 2], Ts[m - 1] + h)) return e;
  }
  return std::nullopt;
}

}  // namespace detail

/// T_i^min for i = 0, 1, ... until T_{i+1}^min matches T_i^min within tol and
/// the (i+1)-witness has a vanishing segment. Levels without any feasible T
/// below the current bound are recorded as infeasible and skipped.
inline QslReport estimate_qsl(const ControlSystem& system, const QslOptions& opt = {}) {
  validate(system);
  if (opt.ns_max < 1) throw invalid_input("estimate_qsl: Ns_max must be >= 1");
  if (!(opt.scan_step > 0.0) || !(opt.T_max > 0.0)) throw invalid_input("estimate_qsl: bad scan settings");
  QslReport rep;
  rep.delta = opt.delta;
  rep.tol = opt.tol;
  MinDurationOptions mopt;
  mopt.delta = opt.delta;
  mopt.tol = opt.tol;
  mopt.refine_tol = opt.refine_tol;
  mopt.budget = opt.budget;

  std::optional<QslLevel> prev;
  for (std::size_t i = 0; i <= opt.ns_max; ++i) {
    QslLevel level;
    level.n_s = i;
    const double bound = prev ? prev->T_min : opt.T_max;
    const auto edge = detail::scan_for_feasible(system, i, bound, prev.has_value(), opt);
    if (edge) {
      auto md = edge->hi - edge->lo > opt.tol || edge->lo == 0.0
                    ? min_duration(system, i, edge->lo, edge->hi, mopt)
                    : min_duration(system, i, std::max(0.0, edge->hi - opt.tol), edge->hi, mopt);
      level.feasible = true;
      level.T_min = md.T_min;
      level.witnesses = std::move(md.witnesses);
      rep.T_min_by_Ns[i] = level.T_min;
    }
    rep.levels.push_back(level);
    if (!level.feasible) continue;
    if (prev && std::abs(level.T_min - prev->T_min) <= opt.tol) {
      bool collapsed = false;
      for (const auto& w : level.witnesses)
        for (double d : w.durations)
          if (d <= opt.zero_threshold) collapsed = true;
      if (collapsed) {
        rep.converged = true;
        rep.qsl_estimate = prev->T_min;
        rep.n_s = prev->n_s;
        for (const auto& w : prev->witnesses) {
          rep.optimal_types.push_back(w.type);
          rep.optimal_durations.push_back(w.durations);
        }
        return rep;
      }
    }
    prev = level;
  }
  if (prev) {
    rep.qsl_estimate = prev->T_min;
    rep.n_s = prev->n_s;
    for (const auto& w : prev->witnesses) {
      rep.optimal_types.push_back(w.type);
      rep.optimal_durations.push_back(w.durations);
    }
  }
  return rep;
}

// ---------------------------------------------------------------- grid oracle

struct GridOracleResult {
  double fidelity = 0.0;
  std::vector<double> durations;
  std::uint64_t cells = 0;
};

inline constexpr double kDefaultGridCap = 1e8;

/// Number of simplex grid cells for `free_axes` axes at `resolution`:
/// C(resolution + free_axes, free_axes).
inline double simplex_cells(std::size_t free_axes, std::size_t resolution) {
  double c = 1.0;
  for (std::size_t k = 1; k <= free_axes; ++k) c = c * static_cast<double>(resolution + k) / static_cast<double>(k);
  return c;
}

/// Exhaustive scan of t_i = k_i T / resolution over the first N_s durations
/// with sum <= T; the last duration takes the remainder.
inline GridOracleResult grid_oracle(const ControlSystem& system, const BangOffType& type, double T,
                                    std::size_t resolution, double cap = kDefaultGridCap, unsigned threads = 1) {
  validate(system);
  if (!(T > 0.0)) throw invalid_input("grid_oracle: T must be positive");
  const std::size_t free_axes = type.size() - 1;
  if (free_axes > 0 && resolution < 2) throw invalid_input("grid_oracle: resolution must be >= 2");
  const double cells = simplex_cells(free_axes, resolution);
  if (cells > cap) throw resource_limit("grid_oracle: grid exceeds the cell cap");
  const BangOffEvaluator ev(system);
  GridOracleResult r;
  if (free_axes == 0) {
    r.durations = {T};
    r.fidelity = ev.fidelity(type, r.durations);
    r.cells = 1;
    return r;
  }
  const double h = T / static_cast<double>(resolution);
  struct Part {
    double a = -1.0;
    std::vector<double> d;
    std::uint64_t cells = 0;
  };
  // Split on the first axis so the scan can run in parallel.
  auto parts = parallel_map<Part>(resolution + 1, threads, [&](std::size_t k0) {
    Part p;
    std::vector<std::size_t> k(free_axes, 0);
    k[0] = k0;
    std::vector<double> d(type.size());
    auto rec = [&](auto&& self, std::size_t axis, std::size_t used) -> void {
      if (axis == free_axes) {
        for (std::size_t i = 0; i < free_axes; ++i) d[i] = static_cast<double>(k[i]) * h;
        d[free_axes] = static_cast<double>(resolution - used) * h;
        const double a = ev.modulus(type, d);
        ++p.cells;
        if (a > p.a) p.a = a, p.d = d;
        return;
      }
      for (std::size_t v = 0; v + used <= resolution; ++v) {
        k[axis] = v;
        self(self, axis + 1, used + v);
      }
    };
    rec(rec, 1, k0);
    return p;
  });
  double best = -1.0;
  for (auto& p : parts) {
    r.cells += p.cells;
    if (p.a > best) best = p.a, r.durations = p.d;
  }
  r.fidelity = best * best;
  return r;
}

// ---------------------------------------------------------------- critical time

inline constexpr double kDefaultTcEpsilon = 1e-12;

struct CriticalTimeReport {
  double T_c = 0.0;
  double epsilon = kDefaultTcEpsilon;
  double low = 0.0;   // F1 - F0 <= epsilon
  double high = 0.0;  // F1 - F0 > epsilon
  int probes = 0;
};

/// F1(T) - F0(T): gain of the best one-switch control over the best single bang.
inline double switch_gain(const ControlSystem& system, double T, const Budget& budget = {}) {
  const double f0 = best_fidelity_at(system, 0, T, budget).fidelity;
  const double f1 = best_fidelity_at(system, 1, T, budget).fidelity;
  return f1 - f0;
}

inline CriticalTimeReport critical_time(const ControlSystem& system, double lo, double hi,
                                        double epsilon = kDefaultTcEpsilon, double tol = 1e-4,
                                        const Budget& budget = {}) {
  validate(system);
  if (!(epsilon > 0.0)) throw invalid_input("critical_time: epsilon must be positive");
  if (!(tol > 0.0)) throw invalid_input("critical_time: tol must be positive");
  if (!(lo > 0.0) || !(hi > lo)) throw bracketing_error("critical_time: need 0 < lo < hi");
  CriticalTimeReport r;
  r.epsilon = epsilon;
  if (switch_gain(system, lo, budget) > epsilon)
    throw bracketing_error("critical_time: switching already helps at the lower end");
  if (!(switch_gain(system, hi, budget) > epsilon))
    throw bracketing_error("critical_time: switching never helps inside the bracket");
  r.probes = 2;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    ++r.probes;
    if (switch_gain(system, mid, budget) > epsilon) hi = mid;
    else lo = mid;
  }
  r.low = lo;
  r.high = hi;
  r.T_c = 0.5 * (lo + hi);
  return r;
}

// ---------------------------------------------------------------- sweeps

struct SweepPoint {
  double T = 0.0;
  double fidelity = 0.0;
  BangOffType type;
};

inline std::vector<SweepPoint> fidelity_vs_T(const ControlSystem& system, std::size_t n_s,
                                             const std::vector<double>& grid, const Budget& budget = {}) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) throw invalid_input("fidelity_vs_T: grid must be positive");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw invalid_input("fidelity_vs_T: grid must be strictly increasing");
  }
  std::vector<SweepPoint> out;
  for (double T : grid) {
    const ProbeResult p = best_fidelity_at(system, n_s, T, budget);
    out.push_back({T, p.fidelity, p.control.type});
  }
  return out;
}

/// Types whose optimum at T reaches 1 - delta, mirror partners included when
/// the pruning folded them away. Sorted.
inline std::vector<TypeOptimum> optimal_types(const ControlSystem& system, std::size_t n_s, double T,
                                              double delta = kDefaultDelta, const Budget& budget = {}) {
  const ProbeResult p = best_fidelity_at(system, n_s, T, budget);
  const bool mirrored = detail::pruning_for(system, budget).mirror_representative;
  std::vector<TypeOptimum> out;
  for (const auto& o : p.per_type) {
    if (o.fidelity < 1.0 - delta) continue;
    out.push_back(o);
    if (mirrored) {
      TypeOptimum n{negate(o.type), o.durations, 0.0};
      n.fidelity = fidelity(system, BangOffControl{n.type, n.durations, system.bound}, T);
      if (n.type != o.type) out.push_back(std::move(n));
    }
  }
  std::sort(out.begin(), out.end(), [](const TypeOptimum& a, const TypeOptimum& b) { return a.type < b.type; });
  return out;
}

}  // namespace bangoff
