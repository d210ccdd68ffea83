#pragma once

// Concrete control systems H(t) = drift + u(t) * control with |u| <= M, and
// closed-form reference values for the driven two-level system.

#include <cmath>
#include <numbers>
#include <string>

#include "bangoff/core.hpp"
#include "bangoff/errors.hpp"

namespace bangoff {

enum class SystemKind { two_level, three_level, custom };

inline std::string to_string(SystemKind k) {
  switch (k) {
    case SystemKind::two_level: return "two_level";
    case SystemKind::three_level: return "three_level";
    case SystemKind::custom: return "custom";
  }
  return "custom";
}

/// Raw physical parameters. They are already folded into drift/control and
/// are kept for reporting only.
struct SystemParameters {
  SystemKind kind = SystemKind::custom;
  double E = 0.0;
  double mu1 = 0.0;
  double mu2 = 0.0;
};

struct ControlSystem {
  HermitianOperator drift;    // control-independent part
  HermitianOperator control;  // multiplies u(t)
  double bound = 1.0;         // M, |u(t)| <= M
  StateVector initial;
  StateVector target;
  SystemParameters params;

  std::size_t dimension() const noexcept { return drift.size(); }

  /// drift + u * control
  HermitianOperator hamiltonian(double u) const { return drift + u * control; }
};

/// Checks the structural invariants: positive finite bound, matching dimensions.
inline void validate(const ControlSystem& s) {
  if (!(s.bound > 0.0) || !std::isfinite(s.bound)) throw invalid_input("ControlSystem: bound M must be positive");
  const std::size_t n = s.drift.size();
  if (n == 0 || s.control.size() != n || s.initial.size() != n || s.target.size() != n)
    throw invalid_input("ControlSystem: dimension mismatch");
}

namespace pauli {
inline HermitianOperator x() { return HermitianOperator(Matrix(2, {0.0, 1.0, 1.0, 0.0})); }
inline HermitianOperator y() {
  return HermitianOperator(Matrix(2, {0.0, cplx{0.0, -1.0}, cplx{0.0, 1.0}, 0.0}));
}
inline HermitianOperator z() { return HermitianOperator(Matrix(2, {1.0, 0.0, 0.0, -1.0})); }
}  // namespace pauli

/// H = -E sigma_z + u sigma_x, starting in |0> = (1, 0).
inline ControlSystem two_level(double E, double M, const StateVector& target) {
  if (!(E > 0.0) || !std::isfinite(E)) throw invalid_input("two_level: E must be positive");
  if (!(M > 0.0) || !std::isfinite(M)) throw invalid_input("two_level: M must be positive");
  if (target.size() != 2) throw invalid_input("two_level: target must be a 2-component state");
  ControlSystem s{(-E) * pauli::z(), pauli::x(), M, StateVector::basis(2, 0), target,
                  SystemParameters{SystemKind::two_level, E, 0.0, 0.0}};
  return s;
}

/// (|0> + e^{i 9pi/10} |1>) / sqrt(2), the equatorial target of the second transfer.
inline StateVector equator_target() {
  return StateVector({1.0, std::polar(1.0, 0.9 * std::numbers::pi)});
}

/// H = -E H0 + mu1 H1 + mu2 u H2 with H0 = diag(1,0,-1), H1 coupling 1-2 and
/// H2 coupling 2-3. Transfer |1> -> |3>.
inline ControlSystem three_level(double E, double mu1, double mu2, double M) {
  if (!std::isfinite(E) || !std::isfinite(mu1) || !std::isfinite(mu2))
    throw invalid_input("three_level: non-finite parameter");
  if (!(M > 0.0) || !std::isfinite(M)) throw invalid_input("three_level: M must be positive");
  const HermitianOperator h0(Matrix(3, {1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0}));
  const HermitianOperator h1(Matrix(3, {0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0}));
  const HermitianOperator h2(Matrix(3, {0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0}));
  ControlSystem s{(-E) * h0 + mu1 * h1, mu2 * h2, M, StateVector::basis(3, 0), StateVector::basis(3, 2),
                  SystemParameters{SystemKind::three_level, E, mu1, mu2}};
  return s;
}

/// Switching times of the time-optimal bang-bang transfer |0> -> |1>.
struct AnalyticCase1 {
  double T1 = 0.0;
  double T2 = 0.0;
  double T_qsl = 0.0;
  double alpha = 0.0;
};

/// Bang-off-bang transfer |0> -> equator_target(). lambda is the off-segment
/// length that completes the transfer with a single switch.
struct AnalyticCase2 {
  double beta = 0.0;
  double tau1 = 0.0;
  double tau2 = 0.0;
  double lambda = 0.0;
};

/// Only holds for alpha = arctan(M/E) > pi/4, where cot^2(alpha) < 1.
inline AnalyticCase1 analytic_case1(double E, double M) {
  if (!(E > 0.0) || !(M > 0.0)) throw invalid_input("analytic_case1: E and M must be positive");
  const double alpha = std::atan(M / E);
  if (!(alpha > std::numbers::pi / 4.0))
    throw out_of_regime("analytic_case1: requires arctan(M/E) > pi/4 (bang-off regime)");
  const double cot2 = (E / M) * (E / M);
  const double omega = std::sqrt(E * E + M * M);
  const double ac = std::acos(cot2);
  AnalyticCase1 r;
  r.alpha = alpha;
  r.T1 = (std::numbers::pi - ac) / (2.0 * omega);
  r.T2 = (std::numbers::pi + ac) / (2.0 * omega);
  r.T_qsl = std::numbers::pi / omega;
  return r;
}

inline AnalyticCase2 analytic_case2(double E, double M) {
  if (!(E > 0.0) || !(M > 0.0)) throw invalid_input("analytic_case2: E and M must be positive");
  if (!(M > E)) throw out_of_regime("analytic_case2: requires M > E");
  AnalyticCase2 r;
  r.beta = std::acos(E / M);
  r.tau1 = analytic_case1(E, M).T1;
  r.tau2 = (r.beta - std::numbers::pi / 10.0) / (2.0 * E);
  r.lambda = (r.beta + std::numbers::pi / 10.0) / (2.0 * E);
  return r;
}

/// Third segment of the E=1, M=4/3 equatorial transfer. Tabulated, no closed form.
inline constexpr double kCase2Tau3 = 0.2978;
/// tau1 + tau2 + tau3 for E=1, M=4/3.
inline constexpr double kCase2TauQsl = 1.1525;

}  // namespace bangoff
