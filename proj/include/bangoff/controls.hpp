#pragma once

// Control-field parameterizations.
//
//  * BangOffControl   -- first class: a type word over {P, N, 0} and free
//                        segment durations.
//  * PiecewiseControl -- second class (and sampled pulses): one value per
//                        slot of a uniform grid.
//  * CrabControl      -- truncated randomized Fourier pulse, clamped to [-M, M].

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bangoff/errors.hpp"
#include "bangoff/random.hpp"

namespace bangoff {

enum class Symbol : std::uint8_t { P = 0, N = 1, Z = 2 };

/// 'P', 'N', or '0' for the off segment.
inline char to_char(Symbol s) noexcept {
  switch (s) {
    case Symbol::P: return 'P';
    case Symbol::N: return 'N';
    case Symbol::Z: return '0';
  }
  return '?';
}

inline Symbol symbol_from_char(char c) {
  switch (c) {
    case 'P': case 'p': case '+': return Symbol::P;
    case 'N': case 'n': case '-': return Symbol::N;
    case '0': case 'Z': case 'z': return Symbol::Z;
    default: throw invalid_input(std::string("unknown control symbol '") + c + "'");
  }
}

inline Symbol negate(Symbol s) noexcept {
  if (s == Symbol::P) return Symbol::N;
  if (s == Symbol::N) return Symbol::P;
  return Symbol::Z;
}

/// Control value of a symbol under amplitude bound M.
inline double level(Symbol s, double M) noexcept {
  if (s == Symbol::P) return M;
  if (s == Symbol::N) return -M;
  return 0.0;
}

/// Segment order of a bang-off control, left to right. Adjacent symbols differ.
class BangOffType {
 public:
  BangOffType() = default;

  explicit BangOffType(std::vector<Symbol> word) : word_(std::move(word)) {
    if (word_.empty()) throw invalid_input("BangOffType: empty word");
    for (std::size_t i = 1; i < word_.size(); ++i)
      if (word_[i] == word_[i - 1]) throw invalid_input("BangOffType: adjacent symbols must differ");
  }

  /// Parses "P0N" style words; 'Z' is accepted for the off symbol.
  static BangOffType parse(std::string_view text) {
    std::vector<Symbol> w;
    w.reserve(text.size());
    for (char c : text) w.push_back(symbol_from_char(c));
    return BangOffType(std::move(w));
  }

  std::size_t size() const noexcept { return word_.size(); }
  std::size_t switches() const noexcept { return word_.empty() ? 0 : word_.size() - 1; }
  Symbol operator[](std::size_t i) const noexcept { return word_[i]; }
  const std::vector<Symbol>& symbols() const noexcept { return word_; }

  std::string str() const {
    std::string s;
    s.reserve(word_.size());
    for (Symbol x : word_) s.push_back(to_char(x));
    return s;
  }

  friend auto operator<=>(const BangOffType&, const BangOffType&) = default;
  friend bool operator==(const BangOffType&, const BangOffType&) = default;

 private:
  std::vector<Symbol> word_;
};

inline BangOffType negate(const BangOffType& t) {
  std::vector<Symbol> w = t.symbols();
  for (auto& s : w) s = negate(s);
  return BangOffType(std::move(w));
}

struct BangOffControl {
  BangOffType type;
  std::vector<double> durations;  // one per symbol, each >= 0
  double amplitude = 1.0;         // M

  double total() const noexcept {
    double s = 0.0;
    for (double d : durations) s += d;
    return s;
  }

  friend bool operator==(const BangOffControl&, const BangOffControl&) = default;
};

inline void validate(const BangOffControl& c) {
  if (c.durations.size() != c.type.size())
    throw invalid_input("BangOffControl: one duration per symbol required");
  for (double d : c.durations)
    if (!std::isfinite(d) || d < 0.0) throw invalid_input("BangOffControl: durations must be finite and >= 0");
  if (!(c.amplitude > 0.0) || !std::isfinite(c.amplitude))
    throw invalid_input("BangOffControl: amplitude must be positive");
}

struct PiecewiseControl {
  std::vector<double> values;  // u_k, one per slot
  double dt = 0.0;             // slot width T / N_T

  std::size_t slots() const noexcept { return values.size(); }
  double total() const noexcept { return dt * static_cast<double>(values.size()); }

  friend bool operator==(const PiecewiseControl&, const PiecewiseControl&) = default;
};

inline void validate(const PiecewiseControl& c) {
  if (c.values.empty()) throw invalid_input("PiecewiseControl: no slots");
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw invalid_input("PiecewiseControl: dt must be positive");
  for (double v : c.values)
    if (!std::isfinite(v)) throw invalid_input("PiecewiseControl: non-finite value");
}

/// u(t) = clamp(sum_n a_n sin(w_n t) + b_n cos(w_n t), -M, M) on [0, T].
struct CrabControl {
  std::vector<std::pair<double, double>> coefficients;  // (a_n, b_n)
  std::vector<double> frequencies;                      // w_n
  double T = 0.0;
  double M = 1.0;

  std::size_t cutoff() const noexcept { return coefficients.size(); }
  double total() const noexcept { return T; }

  friend bool operator==(const CrabControl&, const CrabControl&) = default;
};

inline void validate(const CrabControl& c) {
  if (c.coefficients.empty() || c.coefficients.size() != c.frequencies.size())
    throw invalid_input("CrabControl: need one frequency per coefficient pair");
  if (!(c.T >= 0.0) || !(c.M > 0.0)) throw invalid_input("CrabControl: bad T or M");
}

/// w_n = (2 pi n / T)(1 + r_n), r_n uniform in [-0.5, 0.5].
inline std::vector<double> random_crab_frequencies(std::size_t cutoff, double T, Rng& rng) {
  std::vector<double> w(cutoff);
  for (std::size_t n = 0; n < cutoff; ++n)
    w[n] = 2.0 * std::numbers::pi * static_cast<double>(n + 1) / T * (1.0 + uniform(rng, -0.5, 0.5));
  return w;
}

// ---------------------------------------------------------------- sampling

namespace detail {
inline void check_time(double t, double total) {
  const double slack = 1e-12 * std::max(1.0, total);
  if (!std::isfinite(t) || t < -slack || t > total + slack)
    throw invalid_input("sample: time outside [0, T]");
}
}  // namespace detail

/// Value at t. A switch instant belongs to the later segment; t = T to the last.
inline double sample(const BangOffControl& c, double t) {
  const double total = c.total();
  detail::check_time(t, total);
  double end = 0.0;
  for (std::size_t k = 0; k < c.durations.size(); ++k) {
    end += c.durations[k];
    if (t < end) return level(c.type[k], c.amplitude);
  }
  for (std::size_t k = c.durations.size(); k-- > 0;)
    if (c.durations[k] > 0.0) return level(c.type[k], c.amplitude);
  return level(c.type[c.type.size() - 1], c.amplitude);
}

inline double sample(const PiecewiseControl& c, double t) {
  detail::check_time(t, c.total());
  auto k = static_cast<std::size_t>(std::max(0.0, std::floor(t / c.dt)));
  if (k >= c.values.size()) k = c.values.size() - 1;
  return c.values[k];
}

inline double sample(const CrabControl& c, double t) {
  detail::check_time(t, c.T);
  double u = 0.0;
  for (std::size_t n = 0; n < c.coefficients.size(); ++n) {
    const double wt = c.frequencies[n] * t;
    u += c.coefficients[n].first * std::sin(wt) + c.coefficients[n].second * std::cos(wt);
  }
  return std::clamp(u, -c.M, c.M);
}

// ---------------------------------------------------------------- mirror map

inline BangOffControl negate(const BangOffControl& c) {
  return BangOffControl{negate(c.type), c.durations, c.amplitude};
}

inline PiecewiseControl negate(const PiecewiseControl& c) {
  PiecewiseControl r = c;
  for (auto& v : r.values) v = (v == 0.0) ? 0.0 : -v;
  return r;
}

inline CrabControl negate(const CrabControl& c) {
  CrabControl r = c;
  for (auto& [a, b] : r.coefficients) {
    a = -a;
    b = -b;
  }
  return r;
}

// ---------------------------------------------------------------- resampling

/// Midpoint sampling onto n_slots uniform slots.
template <class Control>
PiecewiseControl to_piecewise(const Control& c, std::size_t n_slots) {
  if (n_slots == 0) throw invalid_input("to_piecewise: need at least one slot");
  const double T = c.total();
  PiecewiseControl p;
  p.dt = T / static_cast<double>(n_slots);
  p.values.resize(n_slots);
  for (std::size_t k = 0; k < n_slots; ++k) p.values[k] = sample(c, (static_cast<double>(k) + 0.5) * p.dt);
  return p;
}

/// D_ij = (1/N_T) sum_k |u_i[k] - u_j[k]|
inline double distance(const PiecewiseControl& a, const PiecewiseControl& b) {
  if (a.values.size() != b.values.size() || a.values.empty())
    throw invalid_input("distance: slot counts differ");
  if (std::abs(a.dt - b.dt) > 1e-12 * std::max(1.0, std::abs(a.dt)))
    throw invalid_input("distance: slot widths differ");
  double s = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) s += std::abs(a.values[k] - b.values[k]);
  return s / static_cast<double>(a.values.size());
}

// ---------------------------------------------------------------- generation

/// Durations uniform on the simplex {t_i >= 0, sum t_i = T} (normalized
/// exponential spacings).
inline BangOffControl random_bangoff(const BangOffType& type, double T, double amplitude, Rng& rng) {
  if (!(T > 0.0)) throw invalid_input("random_bangoff: T must be positive");
  std::vector<double> d(type.size());
  if (d.size() == 1) {
    d[0] = T;
  } else {
    double s = 0.0;
    for (auto& x : d) s += (x = exponential(rng));
    for (auto& x : d) x *= T / s;
  }
  return BangOffControl{type, std::move(d), amplitude};
}

/// Optional reductions of the type search space.
struct PruningRules {
  // An off segment acting on a drift eigenstate only adds a global phase.
  bool drop_leading_off = false;
  bool drop_trailing_off = false;
  // Keep one word of each {w, negate(w)} pair: the one whose first bang is P.
  bool mirror_representative = false;
};

inline bool is_mirror_representative(const BangOffType& t) {
  for (Symbol s : t.symbols()) {
    if (s == Symbol::P) return true;
    if (s == Symbol::N) return false;
  }
  return true;  // all-off word
}

/// All words with n_switches switches, lexicographic in P < N < 0, minus
/// whatever the pruning rules remove. Unpruned count is 3 * 2^n_switches.
inline std::vector<BangOffType> enumerate_types(std::size_t n_switches, const PruningRules& rules = {}) {
  std::vector<BangOffType> out;
  const std::size_t len = n_switches + 1;
  std::vector<Symbol> w(len, Symbol::P);
  // Depth-first in lexicographic order.
  auto recurse = [&](auto&& self, std::size_t pos) -> void {
    if (pos == len) {
      if (rules.drop_leading_off && w.front() == Symbol::Z) return;
      if (rules.drop_trailing_off && w.back() == Symbol::Z) return;
      BangOffType t(w);
      if (rules.mirror_representative && !is_mirror_representative(t)) return;
      out.push_back(std::move(t));
      return;
    }
    for (Symbol s : {Symbol::P, Symbol::N, Symbol::Z}) {
      if (pos > 0 && w[pos - 1] == s) continue;
      w[pos] = s;
      self(self, pos + 1);
    }
  };
  recurse(recurse, 0);
  return out;
}

/// Drops zero-length segments and merges equal neighbours: P_1 0_0 P_2 -> P_3.
inline BangOffControl simplify(const BangOffControl& c, double zero_threshold = 0.0) {
  std::vector<Symbol> w;
  std::vector<double> d;
  for (std::size_t k = 0; k < c.durations.size(); ++k) {
    if (c.durations[k] <= zero_threshold) continue;
    if (!w.empty() && w.back() == c.type[k]) {
      d.back() += c.durations[k];
    } else {
      w.push_back(c.type[k]);
      d.push_back(c.durations[k]);
    }
  }
  if (w.empty()) return BangOffControl{BangOffType({c.type[0]}), {c.total()}, c.amplitude};
  return BangOffControl{BangOffType(std::move(w)), std::move(d), c.amplitude};
}

}  // namespace bangoff
