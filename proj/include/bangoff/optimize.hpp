#pragma once

// Optimizers over the two bang-off classes and the CRAB baseline. Every run
// owns its RNG stream; multi_start derives stream i from (master, i).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "bangoff/controls.hpp"
#include "bangoff/errors.hpp"
#include "bangoff/model.hpp"
#include "bangoff/objective.hpp"
#include "bangoff/parallel.hpp"
#include "bangoff/random.hpp"

namespace bangoff {

struct SdConfig {
  int iterations = 10000;
  double initial_step = 0.0;  // <= 0 means T / 20
  double step_decay = 0.5;
  int patience = 200;
  double min_step = 1e-10;
  std::uint64_t seed = 0;
};

inline void validate(const SdConfig& c) {
  if (c.iterations < 1) throw invalid_input("SdConfig: iterations must be >= 1");
  if (!(c.step_decay > 0.0 && c.step_decay < 1.0)) throw invalid_input("SdConfig: step_decay must lie in (0, 1)");
  if (!(c.min_step > 0.0)) throw invalid_input("SdConfig: min_step must be positive");
  if (c.patience < 1) throw invalid_input("SdConfig: patience must be >= 1");
  if (!std::isfinite(c.initial_step)) throw invalid_input("SdConfig: initial_step must be finite");
}

struct QnConfig {
  int max_iterations = 500;
  double fd_step = 1e-7;
  double gradient_tolerance = 1e-12;
};

struct TracePoint {
  int iteration = 0;
  double bures = 0.0;

  friend bool operator==(const TracePoint&, const TracePoint&) = default;
};

template <class Control>
struct OptimizationResult {
  Control best_control;
  double best_fidelity = 0.0;
  std::vector<TracePoint> trace;
  int iterations_used = 0;
  std::uint64_t seed = 0;
  bool converged = false;

  friend bool operator==(const OptimizationResult&, const OptimizationResult&) = default;
};

using BangOffResult = OptimizationResult<BangOffControl>;
using PiecewiseResult = OptimizationResult<PiecewiseControl>;
using CrabResult = OptimizationResult<CrabControl>;

/// Quasi-Newton stops once 1 - F falls below this.
inline constexpr double kInfidelityFloor = 1e-24;

namespace detail {

// Improvements ceased during the last 20% of the budget.
inline bool stalled(int last_improvement, int used) { return last_improvement <= used - (used + 4) / 5; }

inline void check_start(const BangOffType& type, std::span<const double> d, double T) {
  if (d.size() != type.size()) throw invalid_input("start: one duration per symbol required");
  double s = 0.0;
  for (double x : d) {
    if (!std::isfinite(x) || x < -1e-12) throw invalid_input("start: durations must be finite and >= 0");
    s += x;
  }
  if (std::abs(s - T) > 1e-9 * std::max(1.0, T)) throw invalid_input("start: durations do not sum to T");
}

}  // namespace detail

// ---------------------------------------------------------------- SD over durations

/// Strict-improvement random search on the simplex sum t_i = T, starting
/// from `start`.
inline BangOffResult sd_durations(const BangOffEvaluator& ev, const BangOffType& type, double T,
                                  std::vector<double> start, double amplitude, const SdConfig& cfg) {
  validate(cfg);
  if (!(T > 0.0)) throw invalid_input("sd_durations: T must be positive");
  detail::check_start(type, start, T);
  for (auto& x : start) x = std::max(x, 0.0);

  Rng rng = make_rng(cfg.seed);
  const std::size_t k = type.size();
  std::vector<double> d = std::move(start), cand(k);
  double cur = ev.bures(type, d);

  BangOffResult r;
  r.seed = cfg.seed;
  r.trace.push_back({0, cur});
  if (k == 1) {
    r.best_control = BangOffControl{type, d, amplitude};
    r.best_fidelity = fidelity_from_bures(cur);
    r.converged = true;
    return r;
  }

  double step = cfg.initial_step > 0.0 ? cfg.initial_step : T / 20.0;
  int stale = 0, last_improvement = 0, it = 0;
  bool exhausted = false;
  for (it = 1; it <= cfg.iterations; ++it) {
    const std::size_t j = uniform_index(rng, k);
    const double tj = d[j] + step * standard_normal(rng);
    bool accepted = false;
    if (tj >= 0.0 && tj <= T) {
      double rest = 0.0;
      for (std::size_t m = 0; m < k; ++m)
        if (m != j) rest += d[m];
      const double remaining = T - tj;
      for (std::size_t m = 0; m < k; ++m) {
        if (m == j) cand[m] = tj;
        else if (rest > 0.0) cand[m] = d[m] * (remaining / rest);
        else cand[m] = remaining / static_cast<double>(k - 1);
      }
      const double v = ev.bures(type, cand);
      if (v < cur) {
        d.swap(cand);
        cur = v;
        accepted = true;
        last_improvement = it;
        r.trace.push_back({it, cur});
      }
    }
    if (accepted) {
      stale = 0;
    } else if (++stale >= cfg.patience) {
      step *= cfg.step_decay;
      stale = 0;
      if (step < cfg.min_step) {
        exhausted = true;
        break;
      }
    }
  }
  r.iterations_used = std::min(it, cfg.iterations);
  r.best_control = BangOffControl{type, std::move(d), amplitude};
  r.best_fidelity = fidelity_from_bures(cur);
  r.converged = exhausted || detail::stalled(last_improvement, r.iterations_used);
  return r;
}

/// Random simplex start drawn from the seeded stream.
inline BangOffResult sd_durations(const ControlSystem& system, const BangOffType& type, double T,
                                  const SdConfig& cfg) {
  if (!(T > 0.0)) throw invalid_input("sd_durations: T must be positive");
  const BangOffEvaluator ev(system);
  Rng rng = make_rng(derive_seed(cfg.seed, 0x5eed));
  auto start = random_bangoff(type, T, system.bound, rng).durations;
  return sd_durations(ev, type, T, std::move(start), system.bound, cfg);
}

// ---------------------------------------------------------------- quasi-Newton

/// Central-difference gradient of 1 - F along the directions e_i - e_eliminated
/// (moves that keep the total duration fixed), one entry per i != eliminated.
inline std::vector<double> reduced_gradient(const BangOffEvaluator& ev, const BangOffType& type,
                                            std::span<const double> d, std::size_t eliminated, double h) {
  std::vector<double> out, probe(d.begin(), d.end());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i == eliminated) continue;
    probe[i] += h;
    probe[eliminated] -= h;
    const double fp = ev.infidelity(type, probe);
    probe[i] -= 2.0 * h;
    probe[eliminated] += 2.0 * h;
    const double fm = ev.infidelity(type, probe);
    probe[i] = d[i];
    probe[eliminated] = d[eliminated];
    out.push_back((fp - fm) / (2.0 * h));
  }
  return out;
}

/// BFGS on 1 - F over N_s free durations with central-difference gradients.
/// One coordinate (the largest) is eliminated through sum t_i = T; the rest
/// are bounded below by 0. A step that meets a bound is truncated there, the
/// coordinate pinned, and the curvature estimate restarted.
inline BangOffResult bfgs_durations(const BangOffEvaluator& ev, const BangOffType& type, double T,
                                    std::vector<double> start, double amplitude, const QnConfig& cfg = {}) {
  if (!(T > 0.0)) throw invalid_input("quasi_newton: T must be positive");
  if (cfg.max_iterations < 1 || !(cfg.fd_step > 0.0)) throw invalid_input("quasi_newton: bad configuration");
  detail::check_start(type, start, T);
  const std::size_t k = type.size();
  for (auto& x : start) x = std::max(x, 0.0);
  {
    const double s = std::accumulate(start.begin(), start.end(), 0.0);
    if (s > 0.0)
      for (auto& x : start) x *= T / s;
    else
      std::fill(start.begin(), start.end(), T / static_cast<double>(k));
  }

  BangOffResult r;
  std::vector<double> d = std::move(start);
  auto f = [&](std::span<const double> dd) { return ev.infidelity(type, dd); };
  double fx = f(d);
  r.trace.push_back({0, bures_from_infidelity(fx)});
  if (k == 1) {
    r.best_control = BangOffControl{type, d, amplitude};
    r.best_fidelity = fidelity_from_bures(r.trace.back().bures);
    r.converged = true;
    return r;
  }

  const std::size_t m = k - 1;
  std::size_t e = 0;
  std::vector<std::size_t> idx(m);
  auto choose_eliminated = [&] {
    e = static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
    for (std::size_t i = 0, j = 0; i < k; ++i)
      if (i != e) idx[j++] = i;
  };
  choose_eliminated();

  std::vector<double> H(m * m), g(m), gn(m), dir(m), trial(k), s(m), y(m), hy(m);
  auto reset_h = [&] {
    std::fill(H.begin(), H.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) H[i * m + i] = 1.0;
  };
  auto gradient = [&](const std::vector<double>& at, std::vector<double>& out) {
    out = reduced_gradient(ev, type, at, e, cfg.fd_step);
  };

  reset_h();
  bool fresh_h = true;
  gradient(d, g);
  int it = 0;
  for (it = 1; it <= cfg.max_iterations; ++it) {
    if (fx <= kInfidelityFloor) {
      r.converged = true;
      break;
    }
    double pnorm = 0.0;
    std::vector<bool> active(m);
    for (std::size_t i = 0; i < m; ++i) {
      active[i] = d[idx[i]] <= 0.0 && g[i] > 0.0;
      if (!active[i]) pnorm += g[i] * g[i];
    }
    if (std::sqrt(pnorm) < cfg.gradient_tolerance) {
      r.converged = true;
      break;
    }
    auto make_direction = [&] {
      for (std::size_t i = 0; i < m; ++i) {
        double v = 0.0;
        if (!active[i])
          for (std::size_t j = 0; j < m; ++j)
            if (!active[j]) v -= H[i * m + j] * g[j];
        dir[i] = v;
      }
    };
    make_direction();
    double gd = 0.0;
    for (std::size_t i = 0; i < m; ++i) gd += g[i] * dir[i];
    if (!(gd < 0.0)) {
      reset_h();
      fresh_h = true;
      make_direction();
      gd = 0.0;
      for (std::size_t i = 0; i < m; ++i) gd += g[i] * dir[i];
      if (!(gd < 0.0)) {
        r.converged = true;
        break;
      }
    }

    double alpha_max = std::numeric_limits<double>::infinity();
    std::size_t block = k;  // index into d of the blocking coordinate
    double dsum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      dsum += dir[i];
      if (dir[i] < 0.0) {
        const double a = d[idx[i]] / -dir[i];
        if (a < alpha_max) alpha_max = a, block = idx[i];
      }
    }
    if (dsum > 0.0) {
      const double a = d[e] / dsum;
      if (a < alpha_max) alpha_max = a, block = e;
    }

    double alpha = std::min(1.0, alpha_max);
    bool accepted = false, hit = false;
    double fn = fx;
    for (int ls = 0; ls < 80; ++ls) {
      hit = alpha >= alpha_max;
      trial = d;
      for (std::size_t i = 0; i < m; ++i) trial[idx[i]] += alpha * dir[i];
      trial[e] -= alpha * dsum;
      if (hit) trial[block] = 0.0;
      for (auto& x : trial) x = std::max(x, 0.0);
      {
        double sum_free = 0.0;
        for (std::size_t i = 0; i < m; ++i) sum_free += trial[idx[i]];
        if (block != e || !hit) trial[e] = std::max(0.0, T - sum_free);
      }
      fn = f(trial);
      if (fn < fx && fn <= fx + 1e-4 * alpha * gd) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      r.converged = true;
      break;
    }

    for (std::size_t i = 0; i < m; ++i) s[i] = trial[idx[i]] - d[idx[i]];
    d = trial;
    fx = fn;
    r.trace.push_back({it, bures_from_infidelity(fx)});

    const bool reselect = hit && block == e;
    if (reselect || d[e] < 0.5 * *std::max_element(d.begin(), d.end())) {
      choose_eliminated();
      reset_h();
      fresh_h = true;
      gradient(d, g);
      continue;
    }
    gradient(d, gn);
    if (hit) {
      reset_h();
      fresh_h = true;
      g = gn;
      continue;
    }
    double sy = 0.0, yy = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      y[i] = gn[i] - g[i];
      sy += s[i] * y[i];
      yy += y[i] * y[i];
      ss += s[i] * s[i];
    }
    if (sy > 1e-12 * std::sqrt(ss * yy)) {
      if (fresh_h) {
        for (auto& v : H) v *= sy / yy;
        fresh_h = false;
      }
      for (std::size_t i = 0; i < m; ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < m; ++j) v += H[i * m + j] * y[j];
        hy[i] = v;
      }
      double yhy = 0.0;
      for (std::size_t i = 0; i < m; ++i) yhy += y[i] * hy[i];
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
          H[i * m + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
    }
    g = gn;
  }
  r.iterations_used = std::min(it, cfg.max_iterations);
  r.best_control = BangOffControl{type, std::move(d), amplitude};
  r.best_fidelity = fidelity_from_bures(r.trace.back().bures);
  return r;
}


/// Tries each short segment (<= window * T) pinned at zero, re-polishing on
/// that face, and keeps any strict improvement. Boundary optima whose
/// infidelity rises only at high order in the segment length are invisible
/// to a gradient step; this lands on them directly.
inline std::vector<double> probe_faces(const BangOffEvaluator& ev, const BangOffType& type, double T,
                                       std::vector<double> d, double amplitude, double window = 0.05,
                                       const QnConfig& cfg = {}) {
  const std::size_t k = type.size();
  if (k < 2) return d;
  double cur = ev.infidelity(type, d);
  auto nonzero = [](const std::vector<double>& v) {
    return std::count_if(v.begin(), v.end(), [](double x) { return x != 0.0; });
  };
  bool improved = true;
  for (std::size_t round = 0; improved && round < 4 * k; ++round) {
    improved = false;
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
    for (std::size_t i : order) {
      if (d[i] == 0.0 || d[i] > window * T) continue;
      std::vector<double> c = d;
      const double rest = T - c[i];
      if (!(rest > 0.0)) continue;
      c[i] = 0.0;
      for (std::size_t j = 0; j < k; ++j)
        if (j != i) c[j] *= T / rest;
      double v = ev.infidelity(type, c);
      if (v > cur && v > kInfidelityFloor) {
        // Polish on the face itself: drop segment i, merge equal neighbours,
        // optimize the shorter word and embed it back with an exact zero.
        std::vector<Symbol> w;
        std::vector<double> x;
        std::vector<std::size_t> owner(k, k);
        for (std::size_t j = 0; j < k; ++j) {
          if (j == i) continue;
          if (!w.empty() && w.back() == type[j]) {
            x.back() += c[j];
          } else {
            w.push_back(type[j]);
            x.push_back(c[j]);
            owner[j] = w.size() - 1;
          }
        }
        x = bfgs_durations(ev, BangOffType(std::move(w)), T, x, amplitude, cfg).best_control.durations;
        for (std::size_t j = 0; j < k; ++j) c[j] = owner[j] < k ? x[owner[j]] : 0.0;
        v = ev.infidelity(type, c);
      }
      // Below the floor both are exact to working precision; prefer the face
      // with fewer segments.
      if (v < cur || (v <= kInfidelityFloor && cur <= kInfidelityFloor && nonzero(c) < nonzero(d))) {
        d = std::move(c);
        cur = v;
        improved = true;
        break;
      }
    }
  }
  return d;
}

/// BFGS refinement followed by the face probe, so segments that should vanish
/// end at exactly zero.
inline BangOffResult quasi_newton(const BangOffEvaluator& ev, const BangOffType& type, double T,
                                  std::vector<double> start, double amplitude, const QnConfig& cfg = {}) {
  BangOffResult r = bfgs_durations(ev, type, T, std::move(start), amplitude, cfg);
  auto& d = r.best_control.durations;
  const double before = ev.infidelity(type, d);
  d = probe_faces(ev, type, T, std::move(d), amplitude, 0.05, cfg);
  const double after = ev.infidelity(type, d);
  if (after < before) {
    r.trace.push_back({r.iterations_used, bures_from_infidelity(after)});
    r.best_fidelity = fidelity_from_bures(r.trace.back().bures);
  }
  return r;
}

inline BangOffResult quasi_newton(const ControlSystem& system, const BangOffType& type, double T,
                                  std::vector<double> start, const QnConfig& cfg = {}) {
  return quasi_newton(BangOffEvaluator(system), type, T, std::move(start), system.bound, cfg);
}

// ---------------------------------------------------------------- 1-flip SD

/// Second-class search: slots take values in {-M, 0, +M}. A proposal changes
/// one slot to one of its two other values; strict improvements are kept.
/// Converged means every one of the 2 N_T single flips was tried since the
/// last acceptance and none improved.
inline PiecewiseResult one_flip_sd(const ControlSystem& system, double T, std::size_t n_slots, const SdConfig& cfg) {
  validate(cfg);
  validate(system);
  if (n_slots == 0) throw invalid_input("one_flip_sd: need at least one slot");
  if (!(T > 0.0)) throw invalid_input("one_flip_sd: T must be positive");
  const double M = system.bound;
  const double dt = T / static_cast<double>(n_slots);
  const std::array<double, 3> levels{-M, 0.0, M};
  std::array<Matrix, 3> U;
  for (int v = 0; v < 3; ++v) U[v] = expm_hermitian(system.hamiltonian(levels[v]), dt).matrix();
  const std::size_t n = system.dimension();

  Rng rng = make_rng(cfg.seed);
  std::vector<int> slot(n_slots);
  for (auto& s : slot) s = static_cast<int>(uniform_index(rng, 3));

  std::vector<cplx> psi(n), next(n);
  auto infidelity = [&](const std::vector<int>& w) {
    std::copy(system.initial.amplitudes().begin(), system.initial.amplitudes().end(), psi.begin());
    for (int v : w) {
      const Matrix& u = U[v];
      for (std::size_t i = 0; i < n; ++i) {
        cplx acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += u(i, j) * psi[j];
        next[i] = acc;
      }
      psi.swap(next);
    }
    return detail::orthogonal_weight(system.target, psi);
  };

  PiecewiseResult r;
  r.seed = cfg.seed;
  double cur = infidelity(slot);
  r.trace.push_back({0, bures_from_infidelity(cur)});
  std::vector<char> tried(2 * n_slots, 0);
  std::size_t n_tried = 0;
  int it = 0;
  for (it = 1; it <= cfg.iterations; ++it) {
    const std::size_t j = uniform_index(rng, n_slots);
    const std::size_t alt = uniform_index(rng, 2);
    const int old = slot[j];
    const int nv = (old + 1 + static_cast<int>(alt)) % 3;
    slot[j] = nv;
    const double e = infidelity(slot);
    if (e < cur) {
      cur = e;
      r.trace.push_back({it, bures_from_infidelity(cur)});
      std::fill(tried.begin(), tried.end(), 0);
      n_tried = 0;
    } else {
      slot[j] = old;
      char& flag = tried[2 * j + alt];
      if (!flag) {
        flag = 1;
        if (++n_tried == tried.size()) {
          r.converged = true;
          break;
        }
      }
    }
  }
  r.iterations_used = std::min(it, cfg.iterations);
  r.best_control.dt = dt;
  r.best_control.values.resize(n_slots);
  for (std::size_t j = 0; j < n_slots; ++j) r.best_control.values[j] = levels[slot[j]];
  r.best_fidelity = fidelity_from_bures(r.trace.back().bures);
  return r;
}

/// True if no single slot change in {-M, 0, +M} strictly raises the fidelity.
inline bool is_one_flip_optimal(const ControlSystem& system, const PiecewiseControl& c) {
  const double M = system.bound;
  SlotEvaluator ev(system, c.dt);
  const double base = ev.infidelity(c.values);
  std::vector<double> w = c.values;
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double old = w[j];
    for (double v : {-M, 0.0, M}) {
      if (v == old) continue;
      w[j] = v;
      if (ev.infidelity(w) < base) return false;
    }
    w[j] = old;
  }
  return true;
}

// ---------------------------------------------------------------- CRAB

struct CrabConfig {
  int evaluations = 2000;  // per restart
  std::size_t slices = kDefaultCrabSlices;
  unsigned threads = 1;
};

namespace detail {

// psi <- exp(-i H dt) psi by Taylor series, split so each piece has ||H dt|| <= 1/2.
// With that bound the series is summed until terms fall below 1e-17.
inline void taylor_evolve(const Matrix& h, double hnorm, double dt, std::span<cplx> psi, std::span<cplx> term,
                          std::span<cplx> tmp) {
  const std::size_t n = psi.size();
  const int pieces = std::max(1, static_cast<int>(std::ceil(hnorm * dt / 0.5)));
  const double tau = dt / pieces;
  for (int p = 0; p < pieces; ++p) {
    std::copy(psi.begin(), psi.end(), term.begin());
    for (int order = 1; order < 40; ++order) {
      double tn = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cplx s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += h(i, j) * term[j];
        tmp[i] = s * cplx{0.0, -tau / order};
        tn = std::max(tn, std::abs(tmp[i]));
      }
      for (std::size_t i = 0; i < n; ++i) {
        term[i] = tmp[i];
        psi[i] += term[i];
      }
      if (tn < 1e-17) break;
    }
  }
}

// |<target|psi(T)>| for a CRAB pulse, slices held at their midpoint values.
class CrabObjective {
 public:
  CrabObjective(const ControlSystem& system, std::vector<double> frequencies, double T, std::size_t slices)
      : system_(system), freq_(std::move(frequencies)), T_(T), slices_(slices) {
    dt_ = T / static_cast<double>(slices);
    drift_ = system.drift.matrix();
    ctrl_ = system.control.matrix();
    for (int s = 0; s < 2; ++s) bang_[s] = Evolver(system.hamiltonian(s == 0 ? system.bound : -system.bound));
    dnorm_ = row_norm(drift_);
    cnorm_ = row_norm(ctrl_);
    const std::size_t n = system.dimension();
    // sin/cos tables per slice midpoint.
    table_.resize(slices * freq_.size() * 2);
    for (std::size_t k = 0; k < slices; ++k) {
      const double t = (static_cast<double>(k) + 0.5) * dt_;
      for (std::size_t q = 0; q < freq_.size(); ++q) {
        table_[(k * freq_.size() + q) * 2] = std::sin(freq_[q] * t);
        table_[(k * freq_.size() + q) * 2 + 1] = std::cos(freq_[q] * t);
      }
    }
    psi_.resize(n);
    term_.resize(n);
    tmp_.resize(n);
    h_ = Matrix(n);
  }

  /// 1 - F; coefficients laid out as a_1, b_1, a_2, b_2, ...
  double infidelity(std::span<const double> coef) const {
    const double M = system_.bound;
    const std::size_t n = system_.dimension();
    std::copy(system_.initial.amplitudes().begin(), system_.initial.amplitudes().end(), psi_.begin());
    const std::size_t nc = freq_.size();
    for (std::size_t k = 0; k < slices_; ++k) {
      double u = 0.0;
      const double* tb = &table_[k * nc * 2];
      for (std::size_t q = 0; q < nc; ++q) u += coef[2 * q] * tb[2 * q] + coef[2 * q + 1] * tb[2 * q + 1];
      if (u >= M) {
        bang_[0].evolve(psi_, dt_);
      } else if (u <= -M) {
        bang_[1].evolve(psi_, dt_);
      } else {
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) h_(i, j) = drift_(i, j) + u * ctrl_(i, j);
        taylor_evolve(h_, dnorm_ + std::abs(u) * cnorm_, dt_, psi_, term_, tmp_);
      }
    }
    return orthogonal_weight(system_.target, psi_);
  }

  CrabControl control(std::span<const double> coef) const {
    CrabControl c;
    c.coefficients.resize(freq_.size());
    for (std::size_t q = 0; q < freq_.size(); ++q) c.coefficients[q] = {coef[2 * q], coef[2 * q + 1]};
    c.frequencies = freq_;
    c.T = T_;
    c.M = system_.bound;
    return c;
  }

 private:
  static double row_norm(const Matrix& m) {
    double best = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m.size(); ++j) s += std::abs(m(i, j));
      best = std::max(best, s);
    }
    return best;
  }

  const ControlSystem& system_;
  std::vector<double> freq_;
  double T_, dt_ = 0.0;
  std::size_t slices_;
  Matrix drift_, ctrl_;
  std::array<Evolver, 2> bang_;
  double dnorm_ = 0.0, cnorm_ = 0.0;
  std::vector<double> table_;
  mutable std::vector<cplx> psi_, term_, tmp_;
  mutable Matrix h_;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::vector<double> history;  // best value after each iteration
  int evaluations = 0;
};

// Minimizes fn from x0 with an axis-aligned initial simplex of edge `scale`.
template <class Fn>
NelderMeadResult nelder_mead(Fn&& fn, std::vector<double> x0, double scale, int max_evaluations) {
  const std::size_t dim = x0.size();
  std::vector<std::vector<double>> pts(dim + 1, x0);
  std::vector<double> val(dim + 1);
  NelderMeadResult r;
  for (std::size_t i = 0; i < dim; ++i) pts[i + 1][i] += scale;
  for (std::size_t i = 0; i <= dim; ++i) {
    val[i] = fn(pts[i]);
    ++r.evaluations;
  }
  std::vector<std::size_t> order(dim + 1);
  std::vector<double> centroid(dim), xr(dim), xe(dim), xc(dim);
  auto at = [&](const std::vector<double>& base, double coef, std::vector<double>& out) {
    for (std::size_t j = 0; j < dim; ++j) out[j] = centroid[j] + coef * (base[j] - centroid[j]);
  };
  while (r.evaluations < max_evaluations) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[dim - 1 < dim ? dim - 1 : 0];
    r.history.push_back(val[best]);
    if (val[worst] - val[best] <= 1e-18) break;
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= dim; ++i)
      if (i != worst)
        for (std::size_t j = 0; j < dim; ++j) centroid[j] += pts[i][j] / static_cast<double>(dim);

    at(pts[worst], -1.0, xr);
    const double fr = fn(xr);
    ++r.evaluations;
    if (fr < val[best]) {
      at(pts[worst], -2.0, xe);
      const double fe = fn(xe);
      ++r.evaluations;
      if (fe < fr) pts[worst] = xe, val[worst] = fe;
      else pts[worst] = xr, val[worst] = fr;
      continue;
    }
    if (fr < val[second]) {
      pts[worst] = xr, val[worst] = fr;
      continue;
    }
    const bool outside = fr < val[worst];
    at(outside ? xr : pts[worst], 0.5, xc);
    const double fc = fn(xc);
    ++r.evaluations;
    if (fc < (outside ? fr : val[worst])) {
      pts[worst] = xc, val[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= dim; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < dim; ++j) pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
      val[i] = fn(pts[i]);
      ++r.evaluations;
    }
  }
  const std::size_t b = static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin());
  r.x = pts[b];
  r.value = val[b];
  r.history.push_back(r.value);
  return r;
}

}  // namespace detail

/// Best of `restarts` Nelder-Mead runs over 2 N_c Fourier coefficients.
/// Restart i uses stream derive_seed(seed, i) for frequencies and start.
inline CrabResult crab_optimize(const ControlSystem& system, double T, std::size_t n_c, int restarts,
                                std::uint64_t seed, const CrabConfig& cfg = {}) {
  validate(system);
  if (n_c == 0) throw invalid_input("crab_optimize: N_c must be >= 1");
  if (restarts < 1) throw invalid_input("crab_optimize: restarts must be >= 1");
  if (!(T > 0.0)) throw invalid_input("crab_optimize: T must be positive");
  if (cfg.evaluations < 1 || cfg.slices == 0) throw invalid_input("crab_optimize: bad configuration");
  const double M = system.bound;
  struct Run {
    CrabControl control;
    double value = 1.0;
    std::vector<double> history;
    int evaluations = 0;
  };
  auto runs = parallel_map<Run>(static_cast<std::size_t>(restarts), cfg.threads, [&](std::size_t i) {
    Rng rng = make_rng(derive_seed(seed, i));
    auto freq = random_crab_frequencies(n_c, T, rng);
    std::vector<double> x0(2 * n_c);
    for (auto& v : x0) v = uniform(rng, -M, M) / static_cast<double>(n_c);
    const detail::CrabObjective obj(system, std::move(freq), T, cfg.slices);
    auto res = detail::nelder_mead(
        [&](const std::vector<double>& c) { return obj.infidelity(c); },
        std::move(x0), 0.5 * M / static_cast<double>(n_c), cfg.evaluations);
    return Run{obj.control(res.x), res.value, std::move(res.history), res.evaluations};
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (runs[i].value < runs[best].value) best = i;

  CrabResult r;
  r.seed = seed;
  r.best_control = runs[best].control;
  r.iterations_used = runs[best].evaluations;
  r.converged = runs[best].evaluations < cfg.evaluations;
  // The trace ends at the value under the reference slicing, so it matches propagate().
  const double db = bures_from_infidelity(infidelity(system, r.best_control, T));
  int last = 0;
  for (std::size_t i = 0; i < runs[best].history.size(); ++i) {
    const double b = std::max(bures_from_infidelity(std::clamp(runs[best].history[i], 0.0, 1.0)), db);
    if (r.trace.empty() || b < r.trace.back().bures) r.trace.push_back({last = static_cast<int>(i), b});
  }
  if (r.trace.empty() || db < r.trace.back().bures) r.trace.push_back({std::max(last + 1, r.iterations_used), db});
  r.best_fidelity = fidelity_from_bures(db);
  return r;
}

// ---------------------------------------------------------------- multi-start

/// Runs worker(seed_i, i) for i < n_points with seed_i = derive_seed(master, i).
/// Output is in index order and independent of the thread count.
template <class Worker>
auto multi_start(std::size_t n_points, std::uint64_t master_seed, Worker&& worker, unsigned threads = 0) {
  if (n_points == 0) throw invalid_input("multi_start: n_points must be >= 1");
  using R = decltype(worker(std::uint64_t{}, std::size_t{}));
  return parallel_map<R>(n_points, threads, [&](std::size_t i) { return worker(derive_seed(master_seed, i), i); });
}

}  // namespace bangoff
