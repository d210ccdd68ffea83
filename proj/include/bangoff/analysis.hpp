#pragma once

// Landscapes over two duration coordinates, robustness of an optimal control
// under Gaussian perturbations, and the distribution of pairwise distances
// between optimized piecewise controls.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "bangoff/controls.hpp"
#include "bangoff/errors.hpp"
#include "bangoff/objective.hpp"
#include "bangoff/optimize.hpp"
#include "bangoff/parallel.hpp"
#include "bangoff/random.hpp"

namespace bangoff {

// ---------------------------------------------------------------- landscape

enum class LandscapeMode { free_total, fixed_total };
enum class LandscapeValue { fidelity, log_bures };

inline constexpr double kBuresFloor = 1e-16;
inline constexpr double kDefaultLandscapeCap = 1e8;

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n = 101;  // points, endpoints included

  double at(std::size_t i) const {
    return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
};

struct LandscapeSpec {
  Axis axis1;
  Axis axis2;
  LandscapeMode mode = LandscapeMode::free_total;
  double T = 0.0;  // fixed_total only
  LandscapeValue value = LandscapeValue::fidelity;
  double cap = kDefaultLandscapeCap;
  unsigned threads = 1;
};

/// values[i1 * axis2.n + i2]; NaN marks infeasible cells (t1 + t2 > T).
struct LandscapeGrid {
  Axis axis1;
  Axis axis2;
  LandscapeMode mode = LandscapeMode::free_total;
  LandscapeValue value = LandscapeValue::fidelity;
  double T = 0.0;
  std::vector<double> values;

  double operator()(std::size_t i1, std::size_t i2) const { return values[i1 * axis2.n + i2]; }
  bool feasible(std::size_t i1, std::size_t i2) const { return !std::isnan((*this)(i1, i2)); }
};

inline double log10_bures(double infidelity) {
  return std::log10(std::max(bures_from_infidelity(infidelity), kBuresFloor));
}

/// The durations of one landscape cell: (t1, t2) for two-segment words in
/// free mode, (t1, t2, T - t1 - t2) for three-segment words in fixed mode.
inline std::vector<double> landscape_durations(const LandscapeSpec& spec, double t1, double t2) {
  if (spec.mode == LandscapeMode::free_total) return {t1, t2};
  return {t1, t2, std::max(0.0, spec.T - t1 - t2)};
}

inline LandscapeGrid landscape(const ControlSystem& system, const BangOffType& type, const LandscapeSpec& spec) {
  validate(system);
  const std::size_t need = spec.mode == LandscapeMode::free_total ? 2 : 3;
  if (type.size() != need)
    throw invalid_input(spec.mode == LandscapeMode::free_total ? "landscape: free-total mode needs a two-segment word"
                                                               : "landscape: fixed-total mode needs a three-segment word");
  for (const Axis* a : {&spec.axis1, &spec.axis2})
    if (a->n == 0 || !(a->lo >= 0.0) || !(a->hi >= a->lo) || !std::isfinite(a->hi))
      throw invalid_input("landscape: bad axis");
  if (spec.mode == LandscapeMode::fixed_total && !(spec.T > 0.0)) throw invalid_input("landscape: T must be positive");
  if (static_cast<double>(spec.axis1.n) * static_cast<double>(spec.axis2.n) > spec.cap)
    throw resource_limit("landscape: grid exceeds the cell cap");

  LandscapeGrid g{spec.axis1, spec.axis2, spec.mode, spec.value, spec.T, {}};
  g.values.assign(spec.axis1.n * spec.axis2.n, std::numeric_limits<double>::quiet_NaN());
  const BangOffEvaluator ev(system);
  parallel_for(spec.axis1.n, spec.threads, [&](std::size_t i) {
    const double t1 = spec.axis1.at(i);
    for (std::size_t j = 0; j < spec.axis2.n; ++j) {
      const double t2 = spec.axis2.at(j);
      if (spec.mode == LandscapeMode::fixed_total && t1 + t2 > spec.T * (1.0 + 1e-12)) continue;
      const double e = ev.infidelity(type, landscape_durations(spec, t1, t2));
      g.values[i * spec.axis2.n + j] = spec.value == LandscapeValue::fidelity ? 1.0 - e : log10_bures(e);
    }
  });
  return g;
}

struct GridPoint {
  std::size_t i1 = 0;
  std::size_t i2 = 0;
  double t1 = 0.0;
  double t2 = 0.0;
  double value = 0.0;
};

/// Feasible cells strictly better than every feasible 8-neighbour (lower
/// for log-Bures, higher for fidelity). Plateaus are not reported.
inline std::vector<GridPoint> local_optima(const LandscapeGrid& g) {
  const bool lower = g.value == LandscapeValue::log_bures;
  std::vector<GridPoint> out;
  const long n1 = static_cast<long>(g.axis1.n), n2 = static_cast<long>(g.axis2.n);
  for (long i = 0; i < n1; ++i)
    for (long j = 0; j < n2; ++j) {
      if (!g.feasible(i, j)) continue;
      const double v = g(i, j);
      bool best = true;
      for (long di = -1; di <= 1 && best; ++di)
        for (long dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          const long a = i + di, b = j + dj;
          if (a < 0 || b < 0 || a >= n1 || b >= n2 || !g.feasible(a, b)) continue;
          const double w = g(a, b);
          if (lower ? !(v < w) : !(v > w)) {
            best = false;
            break;
          }
        }
      if (best) out.push_back({std::size_t(i), std::size_t(j), g.axis1.at(i), g.axis2.at(j), v});
    }
  return out;
}

/// Distinct end points of a multi-start ensemble: controls whose duration
/// vectors lie within `tol` (max norm) share a cluster. Cluster order follows
/// first appearance; each records its best member.
struct MinimumCluster {
  std::vector<double> durations;
  double log10_bures = 0.0;
  std::size_t count = 0;
};

inline std::vector<MinimumCluster> cluster_minima(const ControlSystem& system, const std::vector<BangOffControl>& ends,
                                                  double tol = 1e-3) {
  std::vector<MinimumCluster> out;
  if (ends.empty()) return out;
  const BangOffEvaluator ev(system);
  for (const auto& c : ends) {
    const double lb = log10_bures(ev.infidelity(c.type, c.durations));
    auto it = std::find_if(out.begin(), out.end(), [&](const MinimumCluster& m) {
      if (m.durations.size() != c.durations.size()) return false;
      for (std::size_t k = 0; k < m.durations.size(); ++k)
        if (std::abs(m.durations[k] - c.durations[k]) > tol) return false;
      return true;
    });
    if (it == out.end()) {
      out.push_back({c.durations, lb, 1});
    } else {
      ++it->count;
      if (lb < it->log10_bures) it->durations = c.durations, it->log10_bures = lb;
    }
  }
  return out;
}

// ---------------------------------------------------------------- robustness

enum class PerturbMode { durations, bound };

inline std::string to_string(PerturbMode m) { return m == PerturbMode::durations ? "durations" : "bound"; }

struct RobustnessStats {
  double sigma = 0.0;
  PerturbMode mode = PerturbMode::durations;
  std::size_t n_samples = 0;
  double mean_error = 0.0;  // mean of 1 - F
  double std_error = 0.0;
};

/// Error 1 - F of `control` under Gaussian noise of scale sigma, either on
/// every duration (negative draws clipped to 0) or on the two bang levels
/// (+M and -M drawn independently). Sample i of sigma k uses its own stream.
inline std::vector<RobustnessStats> robustness(const ControlSystem& system, const BangOffControl& control,
                                               PerturbMode mode, const std::vector<double>& sigmas,
                                               std::size_t n_samples, std::uint64_t seed, unsigned threads = 1) {
  validate(system);
  validate(control);
  if (n_samples == 0) throw invalid_input("robustness: need at least one sample");
  for (double s : sigmas)
    if (!(s > 0.0) || !std::isfinite(s)) throw invalid_input("robustness: sigmas must be positive");
  const BangOffEvaluator nominal(system, control.amplitude, control.amplitude);
  if (nominal.infidelity(control.type, control.durations) > 1e-9)
    throw invalid_input("robustness: control is not optimal (1 - F > 1e-9)");

  std::vector<RobustnessStats> out;
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    const double sigma = sigmas[k];
    const std::uint64_t base = derive_seed(seed, k);
    auto errors = parallel_map<double>(n_samples, threads, [&](std::size_t i) {
      Rng rng = make_rng(derive_seed(base, i));
      if (mode == PerturbMode::durations) {
        std::vector<double> d = control.durations;
        for (auto& x : d) x = std::max(0.0, x + sigma * standard_normal(rng));
        return nominal.infidelity(control.type, d);
      }
      const double mp = control.amplitude + sigma * standard_normal(rng);
      const double mm = control.amplitude + sigma * standard_normal(rng);
      return BangOffEvaluator(system, mp, mm).infidelity(control.type, control.durations);
    });
    RobustnessStats st;
    st.sigma = sigma;
    st.mode = mode;
    st.n_samples = n_samples;
    const double n = static_cast<double>(n_samples);
    st.mean_error = std::accumulate(errors.begin(), errors.end(), 0.0) / n;
    double ss = 0.0;
    for (double e : errors) ss += (e - st.mean_error) * (e - st.mean_error);
    st.std_error = n_samples > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    out.push_back(st);
  }
  return out;
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 3) throw invalid_input("loglog_slope: need at least three points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (auto [x, y] : pts) {
    if (!(x > 0.0) || !(y > 0.0)) throw invalid_input("loglog_slope: values must be positive");
    const double lx = std::log(x), ly = std::log(y);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
  }
  const double n = static_cast<double>(pts.size());
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 0.0)) throw invalid_input("loglog_slope: x values must differ");
  return (n * sxy - sx * sy) / den;
}

// ---------------------------------------------------------------- distances

struct PairDistance {
  std::size_t i = 0;
  std::size_t j = 0;
  double D = 0.0;

  bool operator==(const PairDistance&) const = default;
};

struct Histogram {
  double lo = 0.0;  // left edge of bin 0
  double width = 0.0;
  std::vector<std::size_t> counts;

  double center(std::size_t k) const { return lo + (static_cast<double>(k) + 0.5) * width; }
};

struct DistanceReport {
  std::vector<PairDistance> pairs;  // i < j, row order
  Histogram histogram;
  std::vector<double> peaks;  // bin centers
};

namespace detail {

inline double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t k = static_cast<std::size_t>(pos);
  const double f = pos - static_cast<double>(k);
  return k + 1 < sorted.size() ? sorted[k] * (1.0 - f) + sorted[k + 1] * f : sorted[k];
}

}  // namespace detail

/// Freedman-Diaconis histogram of the values. When the values sit on a
/// lattice (as distances between {-M, 0, M} controls do), the width is rounded
/// up to a whole number of lattice steps and bins are centred on lattice points.
inline Histogram fd_histogram(std::vector<double> v) {
  Histogram h;
  if (v.empty()) return h;
  std::sort(v.begin(), v.end());
  const double span = v.back() - v.front();
  const double scale = std::max(1.0, std::abs(v.back()));
  if (span <= 1e-12 * scale) {
    h.width = 1.0;
    h.lo = v.front() - 0.5;
    h.counts = {v.size()};
    return h;
  }
  const double iqr = detail::quantile(v, 0.75) - detail::quantile(v, 0.25);
  double width = 2.0 * iqr / std::cbrt(static_cast<double>(v.size()));
  if (!(width > 0.0)) width = span / std::max(1.0, std::sqrt(static_cast<double>(v.size())));

  // Smallest gap between distinct values; a lattice if every gap is a multiple.
  double q = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double d = v[i] - v[i - 1];
    if (d > 1e-9 * scale) q = std::min(q, d);
  }
  bool lattice = std::isfinite(q);
  for (std::size_t i = 1; i < v.size() && lattice; ++i) {
    const double r = (v[i] - v.front()) / q;
    if (std::abs(r - std::round(r)) > 1e-6) lattice = false;
  }
  if (lattice) {
    width = std::max(1.0, std::ceil(width / q - 1e-9)) * q;
    h.lo = v.front() - 0.5 * q;
  } else {
    h.lo = v.front();
  }
  h.width = width;
  const std::size_t nb = static_cast<std::size_t>(std::floor((v.back() - h.lo) / width)) + 1;
  h.counts.assign(nb, 0);
  for (double x : v) {
    std::size_t k = static_cast<std::size_t>(std::floor((x - h.lo) / width + 1e-9));
    ++h.counts[std::min(k, nb - 1)];
  }
  return h;
}

/// Local maxima of the counts (a flat top counts once) holding at least
/// `threshold` of the modal bin.
inline std::vector<double> histogram_peaks(const Histogram& h, double threshold = 0.05) {
  std::vector<double> out;
  if (h.counts.empty()) return out;
  const double mode = static_cast<double>(*std::max_element(h.counts.begin(), h.counts.end()));
  const std::size_t n = h.counts.size();
  for (std::size_t k = 0; k < n;) {
    std::size_t e = k;
    while (e + 1 < n && h.counts[e + 1] == h.counts[k]) ++e;
    const bool left = k == 0 || h.counts[k - 1] < h.counts[k];
    const bool right = e + 1 == n || h.counts[e + 1] < h.counts[k];
    if (left && right && static_cast<double>(h.counts[k]) >= threshold * mode && h.counts[k] > 0)
      out.push_back(0.5 * (h.center(k) + h.center(e)));
    k = e + 1;
  }
  return out;
}

inline DistanceReport distance_distribution(const std::vector<PiecewiseControl>& controls, unsigned threads = 1) {
  DistanceReport r;
  if (controls.size() < 2) throw invalid_input("distance_distribution: need at least two controls");
  for (const auto& c : controls) {
    validate(c);
    if (c.values.size() != controls.front().values.size() ||
        std::abs(c.dt - controls.front().dt) > 1e-12 * std::max(1.0, controls.front().dt))
      throw invalid_input("distance_distribution: controls live on different grids");
  }
  const std::size_t n = controls.size();
  auto rows = parallel_map<std::vector<double>>(n, threads, [&](std::size_t i) {
    std::vector<double> row;
    for (std::size_t j = i + 1; j < n; ++j) row.push_back(distance(controls[i], controls[j]));
    return row;
  });
  std::vector<double> all;
  all.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      r.pairs.push_back({i, j, rows[i][j - i - 1]});
      all.push_back(rows[i][j - i - 1]);
    }
  r.histogram = fd_histogram(std::move(all));
  r.peaks = histogram_peaks(r.histogram);
  return r;
}

}  // namespace bangoff
