#pragma once

// Time-ordered propagation of a ControlSystem under a control, and the two
// objectives: fidelity F = |<target|psi_f>|^2 and Bures distance
// d_B = sqrt(2 (1 - sqrt F)).

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "bangoff/controls.hpp"
#include "bangoff/core.hpp"
#include "bangoff/errors.hpp"
#include "bangoff/model.hpp"
#include "bangoff/random.hpp"

namespace bangoff {

inline constexpr std::size_t kDefaultCrabSlices = 1000;

struct EvaluationReport {
  StateVector final_state;
  double fidelity = 0.0;
  double infidelity = 0.0;  // 1 - F, resolved below machine epsilon
  double bures = 0.0;
  double T = 0.0;
};

/// sqrt(2 (1 - sqrt F)). F may overshoot [0, 1] by 1e-12 from rounding.
inline double bures(double F) {
  if (!std::isfinite(F) || F < -1e-12 || F > 1.0 + 1e-12) throw invalid_input("bures: fidelity outside [0, 1]");
  F = std::clamp(F, 0.0, 1.0);
  return std::sqrt(2.0 * (1.0 - std::sqrt(F)));
}

/// Same quantity from |<target|psi_f>| directly; keeps resolution near F = 1.
inline double bures_from_modulus(double a) {
  a = std::clamp(a, 0.0, 1.0);
  return std::sqrt(2.0 * (1.0 - a));
}

/// Fidelity that a given Bures distance corresponds to.
inline double fidelity_from_bures(double d) {
  const double a = 1.0 - 0.5 * d * d;
  return a * a;
}

namespace detail {

inline void check_total(double control_total, double T) {
  if (!std::isfinite(T) || T < 0.0) throw invalid_input("propagate: T must be finite and >= 0");
  if (std::abs(control_total - T) > 1e-12 * std::max(1.0, T))
    throw invalid_input("propagate: control duration does not match T");
}

inline void check_amplitude(double value, double bound) {
  if (std::abs(value) > bound * (1.0 + 1e-12) + 1e-12)
    throw invalid_input("propagate: control exceeds the amplitude bound");
}

// ||psi - <t|psi> t||^2 / ||psi||^2
inline double orthogonal_weight(const StateVector& target, std::span<const cplx> psi) {
  cplx c = 0.0;
  double nn = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    c += std::conj(target[i]) * psi[i];
    nn += std::norm(psi[i]);
  }
  double w = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) w += std::norm(psi[i] - c * target[i]);
  return std::clamp(w / nn, 0.0, 1.0);
}

}  // namespace detail

/// sqrt(2 (1 - sqrt(1 - e))) written without cancellation for small e = 1 - F.
inline double bures_from_infidelity(double e) {
  e = std::clamp(e, 0.0, 1.0);
  return std::sqrt(2.0 * e / (1.0 + std::sqrt(1.0 - e)));
}

/// Fast repeated evaluation of bang-off words for one system. Segment
/// generators H(+M_plus), H(-M_minus), H(0) are decomposed once. Durations may
/// be negative (analytic continuation, used by finite differences).
class BangOffEvaluator {
 public:
  explicit BangOffEvaluator(const ControlSystem& system)
      : BangOffEvaluator(system, system.bound, system.bound) {}

  /// Separate magnitudes for the P and N levels (boundary-uncertainty studies).
  BangOffEvaluator(const ControlSystem& system, double m_plus, double m_minus)
      : target_(system.target), initial_(system.initial) {
    validate(system);
    evolvers_[static_cast<int>(Symbol::P)] = Evolver(system.hamiltonian(m_plus));
    evolvers_[static_cast<int>(Symbol::N)] = Evolver(system.hamiltonian(-m_minus));
    evolvers_[static_cast<int>(Symbol::Z)] = Evolver(system.drift);
  }

  std::size_t dimension() const noexcept { return initial_.size(); }

  void final_state(const BangOffType& type, std::span<const double> durations, std::span<cplx> psi) const {
    std::copy(initial_.amplitudes().begin(), initial_.amplitudes().end(), psi.begin());
    for (std::size_t k = 0; k < type.size(); ++k) {
      if (durations[k] == 0.0) continue;
      evolvers_[static_cast<int>(type[k])].evolve(psi, durations[k]);
    }
  }

  /// 1 - F from the component of psi_f orthogonal to the target, which keeps
  /// full relative precision far below machine epsilon.
  double infidelity(const BangOffType& type, std::span<const double> durations) const {
    std::array<cplx, 8> buf{};
    std::vector<cplx> heap;
    std::span<cplx> psi;
    if (dimension() <= buf.size()) {
      psi = std::span<cplx>(buf.data(), dimension());
    } else {
      heap.resize(dimension());
      psi = heap;
    }
    final_state(type, durations, psi);
    return detail::orthogonal_weight(target_, psi);
  }

  double fidelity(const BangOffType& type, std::span<const double> durations) const {
    return 1.0 - infidelity(type, durations);
  }

  /// |<target|psi_f>|
  double modulus(const BangOffType& type, std::span<const double> durations) const {
    return std::sqrt(1.0 - infidelity(type, durations));
  }

  double bures(const BangOffType& type, std::span<const double> durations) const {
    return bures_from_infidelity(infidelity(type, durations));
  }

 private:
  StateVector target_;
  StateVector initial_;
  std::array<Evolver, 3> evolvers_;
};

/// Fixed-slot evaluation of piecewise controls. Slot propagators are cached
/// per distinct control value.
class SlotEvaluator {
 public:
  SlotEvaluator(const ControlSystem& system, double dt) : system_(system), dt_(dt) {
    validate(system);
    if (!(dt > 0.0)) throw invalid_input("SlotEvaluator: dt must be positive");
  }

  double dt() const noexcept { return dt_; }

  const UnitaryPropagator& slot(double u) const {
    auto it = cache_.find(u);
    if (it == cache_.end()) it = cache_.emplace(u, expm_hermitian(system_.hamiltonian(u), dt_)).first;
    return it->second;
  }

  std::vector<cplx> final_amplitudes(std::span<const double> values) const {
    const std::size_t n = system_.dimension();
    std::vector<cplx> psi(system_.initial.amplitudes().begin(), system_.initial.amplitudes().end());
    std::vector<cplx> next(n);
    for (double u : values) {
      const UnitaryPropagator& U = slot(u);
      for (std::size_t i = 0; i < n; ++i) {
        cplx s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += U(i, j) * psi[j];
        next[i] = s;
      }
      psi.swap(next);
    }
    return psi;
  }

  double infidelity(std::span<const double> values) const {
    return detail::orthogonal_weight(system_.target, final_amplitudes(values));
  }

  double fidelity(std::span<const double> values) const { return 1.0 - infidelity(values); }

 private:
  const ControlSystem& system_;
  double dt_;
  mutable std::map<double, UnitaryPropagator> cache_;
};

// ---------------------------------------------------------------- propagate

/// Product of exact segment propagators, first segment acting first.
/// Zero-length segments contribute the identity.
inline StateVector propagate(const ControlSystem& system, const BangOffControl& control, double T) {
  validate(system);
  validate(control);
  detail::check_total(control.total(), T);
  detail::check_amplitude(control.amplitude, system.bound);
  std::vector<cplx> psi(system.initial.amplitudes().begin(), system.initial.amplitudes().end());
  std::array<std::optional<Evolver>, 3> cache;
  for (std::size_t k = 0; k < control.type.size(); ++k) {
    if (control.durations[k] == 0.0) continue;
    auto& ev = cache[static_cast<int>(control.type[k])];
    if (!ev) ev.emplace(system.hamiltonian(level(control.type[k], control.amplitude)));
    ev->evolve(psi, control.durations[k]);
  }
  return StateVector::from_normalized(std::move(psi));
}

inline StateVector propagate(const ControlSystem& system, const PiecewiseControl& control, double T) {
  validate(system);
  validate(control);
  detail::check_total(control.total(), T);
  for (double u : control.values) detail::check_amplitude(u, system.bound);
  return StateVector::from_normalized(SlotEvaluator(system, control.dt).final_amplitudes(control.values));
}

/// Sliced at n_slices midpoints, each slice held constant.
inline StateVector propagate(const ControlSystem& system, const CrabControl& control, double T,
                             std::size_t n_slices = kDefaultCrabSlices) {
  validate(control);
  detail::check_total(control.T, T);
  if (control.M > system.bound * (1.0 + 1e-12)) throw invalid_input("propagate: CRAB clamp exceeds bound");
  if (T == 0.0) return system.initial;
  return propagate(system, to_piecewise(control, n_slices), T);
}

template <class Control>
double infidelity(const ControlSystem& system, const Control& control, double T) {
  const StateVector psi = propagate(system, control, T);
  return detail::orthogonal_weight(system.target, psi.amplitudes());
}

template <class Control>
double fidelity(const ControlSystem& system, const Control& control, double T) {
  return 1.0 - infidelity(system, control, T);
}

template <class Control>
EvaluationReport evaluate(const ControlSystem& system, const Control& control, double T) {
  EvaluationReport r;
  r.final_state = propagate(system, control, T);
  const double e = detail::orthogonal_weight(system.target, r.final_state.amplitudes());
  r.fidelity = 1.0 - e;
  r.infidelity = e;
  r.bures = bures_from_infidelity(e);
  r.T = T;
  return r;
}

// ---------------------------------------------------------------- structure

/// True if psi is an eigenvector of h (to 1e-12 relative to ||h||).
inline bool is_eigenstate(const HermitianOperator& h, const StateVector& psi) {
  const std::size_t n = psi.size();
  std::vector<cplx> hp(n, cplx{0.0, 0.0});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) hp[i] += h(i, j) * psi[j];
  cplx ev = 0.0;
  for (std::size_t i = 0; i < n; ++i) ev += std::conj(psi[i]) * hp[i];
  double r = 0.0;
  for (std::size_t i = 0; i < n; ++i) r += std::norm(hp[i] - ev * psi[i]);
  return std::sqrt(r) <= 1e-12 * std::max(1.0, h.matrix().max_abs());
}

/// Numerical check that <t|H(u_1)...H(u_k)|i> = s <t|H(-u_1)...H(-u_k)|i> for
/// one fixed unit-modulus s, over random words of length 1..6. This makes
/// F(u) = F(-u) for every control.
inline bool mirror_symmetric(const ControlSystem& system, int trials = 40, std::uint64_t seed = 7) {
  validate(system);
  Rng rng = make_rng(seed);
  const double scale = std::max({1.0, system.drift.matrix().max_abs(), system.bound * system.control.matrix().max_abs()});
  const std::size_t n = system.dimension();
  std::optional<cplx> sign;
  auto chain = [&](const std::vector<double>& us, double flip) {
    std::vector<cplx> psi(system.initial.amplitudes().begin(), system.initial.amplitudes().end());
    std::vector<cplx> next(n);
    for (double u : us) {
      const Matrix h = system.hamiltonian(flip * u).matrix();
      for (std::size_t i = 0; i < n; ++i) {
        cplx s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += h(i, j) * psi[j] / scale;
        next[i] = s;
      }
      psi.swap(next);
    }
    cplx s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::conj(system.target[i]) * psi[i];
    return s;
  };
  for (int len = 1; len <= 6; ++len) {
    for (int k = 0; k < trials; ++k) {
      std::vector<double> us(static_cast<std::size_t>(len));
      for (auto& u : us) u = uniform(rng, -system.bound, system.bound);
      const cplx a = chain(us, 1.0), b = chain(us, -1.0);
      if (std::abs(std::abs(a) - std::abs(b)) > 1e-12) return false;
      if (std::abs(a) < 1e-9) continue;
      const cplx s = a / b;
      if (!sign) sign = s;
      else if (std::abs(s - *sign) > 1e-9) return false;
    }
  }
  return true;
}

/// Drift-eigenstate pruning where it applies, plus mirror pairing when the
/// system has the u -> -u symmetry.
inline PruningRules default_pruning(const ControlSystem& system) {
  PruningRules r;
  r.drop_leading_off = is_eigenstate(system.drift, system.initial);
  r.drop_trailing_off = is_eigenstate(system.drift, system.target);
  r.mirror_representative = mirror_symmetric(system);
  return r;
}

}  // namespace bangoff
