#pragma once

// Small dense complex linear algebra: states, Hermitian generators and the
// exact propagators of constant Hamiltonians (hbar = 1).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bangoff/errors.hpp"

namespace bangoff {

using cplx = std::complex<double>;

/// Square complex matrix, row-major. Sized for 2x2 and 3x3 work.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(std::size_t n) : n_(n), a_(n * n, cplx{0.0, 0.0}) {}

  /// Row-major initializer; throws invalid_input if the entry count is not n*n.
  Matrix(std::size_t n, std::initializer_list<cplx> entries) : n_(n), a_(entries) {
    if (a_.size() != n * n) throw invalid_input("Matrix: expected n*n entries");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t size() const noexcept { return n_; }

  cplx& operator()(std::size_t i, std::size_t j) noexcept { return a_[i * n_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const noexcept { return a_[i * n_ + j]; }

  std::span<const cplx> data() const noexcept { return a_; }

  Matrix adjoint() const {
    Matrix r(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) r(j, i) = std::conj((*this)(i, j));
    return r;
  }

  double max_abs() const noexcept {
    double m = 0.0;
    for (const auto& z : a_) m = std::max(m, std::abs(z));
    return m;
  }

  bool all_finite() const noexcept {
    return std::all_of(a_.begin(), a_.end(), [](const cplx& z) {
      return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
  }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.n_ != b.n_) throw invalid_input("Matrix product: dimension mismatch");
    Matrix r(a.n_);
    for (std::size_t i = 0; i < a.n_; ++i)
      for (std::size_t k = 0; k < a.n_; ++k) {
        const cplx aik = a(i, k);
        for (std::size_t j = 0; j < a.n_; ++j) r(i, j) += aik * b(k, j);
      }
    return r;
  }

  friend Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.n_ != b.n_) throw invalid_input("Matrix sum: dimension mismatch");
    Matrix r = a;
    for (std::size_t i = 0; i < r.a_.size(); ++i) r.a_[i] += b.a_[i];
    return r;
  }

  friend Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.n_ != b.n_) throw invalid_input("Matrix difference: dimension mismatch");
    Matrix r = a;
    for (std::size_t i = 0; i < r.a_.size(); ++i) r.a_[i] -= b.a_[i];
    return r;
  }

  friend Matrix operator*(cplx s, const Matrix& m) {
    Matrix r = m;
    for (auto& z : r.a_) z *= s;
    return r;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<cplx> a_;
};

/// Pure state. Construction normalizes; the zero vector and non-finite
/// amplitudes are rejected.
class StateVector {
 public:
  StateVector() = default;

  explicit StateVector(std::vector<cplx> amplitudes) : amp_(std::move(amplitudes)) {
    if (amp_.empty()) throw invalid_input("StateVector: empty");
    double n2 = 0.0;
    for (const auto& z : amp_) {
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw invalid_input("StateVector: non-finite amplitude");
      n2 += std::norm(z);
    }
    if (!(n2 > 0.0)) throw invalid_input("StateVector: zero vector");
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& z : amp_) z *= inv;
  }

  StateVector(std::initializer_list<cplx> amplitudes)
      : StateVector(std::vector<cplx>(amplitudes)) {}

  /// |k> in an n-dimensional space (0-based k).
  static StateVector basis(std::size_t n, std::size_t k) {
    if (k >= n) throw invalid_input("StateVector::basis: index out of range");
    std::vector<cplx> a(n, cplx{0.0, 0.0});
    a[k] = 1.0;
    return StateVector(std::move(a));
  }

  /// Wraps amplitudes that are already unit norm (propagation output).
  static StateVector from_normalized(std::vector<cplx> amplitudes) {
    StateVector s;
    s.amp_ = std::move(amplitudes);
    return s;
  }

  std::size_t size() const noexcept { return amp_.size(); }
  const cplx& operator[](std::size_t i) const noexcept { return amp_[i]; }
  std::span<const cplx> amplitudes() const noexcept { return amp_; }

  double norm() const noexcept {
    double n2 = 0.0;
    for (const auto& z : amp_) n2 += std::norm(z);
    return std::sqrt(n2);
  }

 private:
  std::vector<cplx> amp_;
};

/// Hermitian matrix (energy units). Entries must satisfy h_jk = conj(h_kj)
/// to 1e-14, scaled by the largest entry when that exceeds one.
class HermitianOperator {
 public:
  HermitianOperator() = default;

  explicit HermitianOperator(Matrix m) : m_(std::move(m)) {
    if (!m_.all_finite()) throw invalid_input("HermitianOperator: non-finite entry");
    const double tol = 1e-14 * std::max(1.0, m_.max_abs());
    for (std::size_t i = 0; i < m_.size(); ++i)
      for (std::size_t j = i; j < m_.size(); ++j)
        if (std::abs(m_(i, j) - std::conj(m_(j, i))) > tol)
          throw invalid_input("HermitianOperator: matrix is not Hermitian");
  }

  static HermitianOperator zero(std::size_t n) { return HermitianOperator(Matrix(n)); }

  std::size_t size() const noexcept { return m_.size(); }
  const Matrix& matrix() const noexcept { return m_; }
  const cplx& operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }

  friend HermitianOperator operator+(const HermitianOperator& a, const HermitianOperator& b) {
    return HermitianOperator(a.m_ + b.m_);
  }
  friend HermitianOperator operator-(const HermitianOperator& a, const HermitianOperator& b) {
    return HermitianOperator(a.m_ - b.m_);
  }
  friend HermitianOperator operator*(double s, const HermitianOperator& h) {
    return HermitianOperator(cplx{s, 0.0} * h.m_);
  }

 private:
  Matrix m_;
};

/// Unitary matrix produced by exponentiating a Hermitian generator.
class UnitaryPropagator {
 public:
  UnitaryPropagator() = default;
  explicit UnitaryPropagator(Matrix m) : m_(std::move(m)) {}

  static UnitaryPropagator identity(std::size_t n) { return UnitaryPropagator(Matrix::identity(n)); }

  std::size_t size() const noexcept { return m_.size(); }
  const Matrix& matrix() const noexcept { return m_; }
  const cplx& operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }

  /// Time-ordered composition: (later * earlier) acts earlier first.
  friend UnitaryPropagator operator*(const UnitaryPropagator& later,
                                     const UnitaryPropagator& earlier) {
    return UnitaryPropagator(later.m_ * earlier.m_);
  }

  /// max |(U^dagger U - I)_jk|
  double unitarity_defect() const {
    const Matrix d = m_.adjoint() * m_ - Matrix::identity(m_.size());
    return d.max_abs();
  }

 private:
  Matrix m_;
};

struct Eigensystem {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column k is the eigenvector of values[k]
};

namespace detail {

inline constexpr int kJacobiMaxSweeps = 64;
inline constexpr double kJacobiTolerance = 1e-14;

// Cyclic complex Jacobi. Each rotation first removes the phase of a_pq so the
// 2x2 block is real symmetric, then applies the classical rotation.
inline Eigensystem jacobi_eigh(const Matrix& input) {
  const std::size_t n = input.size();
  Matrix a = input;
  Matrix v = Matrix::identity(n);

  double frob = 0.0;
  for (const auto& z : a.data()) frob += std::norm(z);
  const double tol = kJacobiTolerance * std::max(1.0, std::sqrt(frob));

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = 0; q < n; ++q)
        if (p != q) s += std::norm(a(p, q));
    return std::sqrt(s);
  };

  bool converged = off_norm() <= tol;
  for (int sweep = 0; sweep < kJacobiMaxSweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const cplx apq = a(p, q);
        const double mag = std::abs(apq);
        if (mag == 0.0) continue;
        const cplx phase = apq / mag;
        const cplx cphase = std::conj(phase);
        const double theta = (a(q, q).real() - a(p, p).real()) / (2.0 * mag);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        // A <- A W, V <- V W with W_pp = c, W_pq = s, W_qp = -s e^{-i phi}, W_qq = c e^{-i phi}
        for (std::size_t k = 0; k < n; ++k) {
          const cplx akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * cphase * akq;
          a(k, q) = s * akp + c * cphase * akq;
          const cplx vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * cphase * vkq;
          v(k, q) = s * vkp + c * cphase * vkq;
        }
        // A <- W^dagger A
        for (std::size_t k = 0; k < n; ++k) {
          const cplx apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * phase * aqk;
          a(q, k) = s * apk + c * phase * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
      }
    }
    converged = off_norm() <= tol;
  }
  if (!converged) throw numerical_failure("eigh: Jacobi iteration did not converge");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i).real() < a(j, j).real(); });

  Eigensystem es;
  es.values.resize(n);
  es.vectors = Matrix(n);
  for (std::size_t k = 0; k < n; ++k) {
    es.values[k] = a(order[k], order[k]).real();
    for (std::size_t i = 0; i < n; ++i) es.vectors(i, k) = v(i, order[k]);
  }

  // Modified Gram-Schmidt over the columns; fixes up degenerate subspaces.
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < k; ++j) {
      cplx proj = 0.0;
      for (std::size_t i = 0; i < n; ++i) proj += std::conj(es.vectors(i, j)) * es.vectors(i, k);
      for (std::size_t i = 0; i < n; ++i) es.vectors(i, k) -= proj * es.vectors(i, j);
    }
    double nrm = 0.0;
    for (std::size_t i = 0; i < n; ++i) nrm += std::norm(es.vectors(i, k));
    nrm = std::sqrt(nrm);
    if (!(nrm > 0.0)) throw numerical_failure("eigh: degenerate eigenvector basis");
    for (std::size_t i = 0; i < n; ++i) es.vectors(i, k) /= nrm;
  }
  return es;
}

}  // namespace detail

/// Eigen-decomposition H = V diag(lambda) V^dagger, eigenvalues ascending.
/// Throws numerical_failure if the Jacobi sweep cap (64) is hit.
inline Eigensystem eigh(const HermitianOperator& h) { return detail::jacobi_eigh(h.matrix()); }

/// Repeated exp(-i H t) for one fixed generator. Uses the Pauli closed form
/// for n = 2 and a cached spectral decomposition otherwise. Accepts any real
/// t, including negative values (backward evolution), which finite-difference
/// code relies on; the public expm_hermitian() enforces t >= 0.
class Evolver {
 public:
  Evolver() = default;

  explicit Evolver(const HermitianOperator& h) : n_(h.size()) {
    if (n_ == 2) {
      c0_ = 0.5 * (h(0, 0).real() + h(1, 1).real());
      cz_ = 0.5 * (h(0, 0).real() - h(1, 1).real());
      cx_ = h(0, 1).real();
      cy_ = -h(0, 1).imag();
      r_ = std::sqrt(cx_ * cx_ + cy_ * cy_ + cz_ * cz_);
    } else {
      es_ = eigh(h);
      vh_ = es_.vectors.adjoint();
    }
  }

  std::size_t size() const noexcept { return n_; }

  /// psi <- exp(-i H t) psi, in place.
  void evolve(std::span<cplx> psi, double t) const {
    if (n_ == 2) {
      cplx u00, u01, u10, u11;
      pauli_entries(t, u00, u01, u10, u11);
      const cplx a = psi[0], b = psi[1];
      psi[0] = u00 * a + u01 * b;
      psi[1] = u10 * a + u11 * b;
      return;
    }
    cplx tmp[8];
    std::vector<cplx> heap;
    cplx* w = tmp;
    if (n_ > 8) {
      heap.resize(n_);
      w = heap.data();
    }
    for (std::size_t k = 0; k < n_; ++k) {
      cplx s = 0.0;
      for (std::size_t i = 0; i < n_; ++i) s += vh_(k, i) * psi[i];
      w[k] = s * std::polar(1.0, -es_.values[k] * t);
    }
    for (std::size_t i = 0; i < n_; ++i) {
      cplx s = 0.0;
      for (std::size_t k = 0; k < n_; ++k) s += es_.vectors(i, k) * w[k];
      psi[i] = s;
    }
  }

  UnitaryPropagator propagator(double t) const {
    Matrix u(n_);
    if (n_ == 2) {
      pauli_entries(t, u(0, 0), u(0, 1), u(1, 0), u(1, 1));
      return UnitaryPropagator(std::move(u));
    }
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) {
        cplx s = 0.0;
        for (std::size_t k = 0; k < n_; ++k)
          s += es_.vectors(i, k) * std::polar(1.0, -es_.values[k] * t) * vh_(k, j);
        u(i, j) = s;
      }
    return UnitaryPropagator(std::move(u));
  }

 private:
  // H = c0 I + c.sigma  =>  U = e^{-i c0 t} (cos(rt) I - i sin(rt)/r c.sigma)
  void pauli_entries(double t, cplx& u00, cplx& u01, cplx& u10, cplx& u11) const {
    const cplx ph = std::polar(1.0, -c0_ * t);
    const double rt = r_ * t;
    const double cs = std::cos(rt);
    double sr;  // sin(r t) / r
    if (std::abs(rt) < 1e-8)
      sr = t * (1.0 - rt * rt / 6.0);
    else
      sr = std::sin(rt) / r_;
    const cplx mi{0.0, -1.0};
    u00 = ph * (cs + mi * sr * cz_);
    u11 = ph * (cs - mi * sr * cz_);
    u01 = ph * (mi * sr * cplx{cx_, -cy_});
    u10 = ph * (mi * sr * cplx{cx_, cy_});
  }

  std::size_t n_ = 0;
  double c0_ = 0.0, cx_ = 0.0, cy_ = 0.0, cz_ = 0.0, r_ = 0.0;
  Eigensystem es_;
  Matrix vh_;
};

/// exp(-i H dt) for dt >= 0. Closed form for 2x2, spectral otherwise.
inline UnitaryPropagator expm_hermitian(const HermitianOperator& h, double dt) {
  if (!std::isfinite(dt)) throw invalid_input("expm_hermitian: non-finite duration");
  if (dt < 0.0) throw invalid_input("expm_hermitian: negative duration");
  return Evolver(h).propagator(dt);
}

/// Spectral route for any dimension; used to cross-check the 2x2 closed form.
inline UnitaryPropagator expm_hermitian_spectral(const HermitianOperator& h, double dt) {
  if (!std::isfinite(dt)) throw invalid_input("expm_hermitian: non-finite duration");
  if (dt < 0.0) throw invalid_input("expm_hermitian: negative duration");
  const Eigensystem es = eigh(h);
  const std::size_t n = h.size();
  Matrix u(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      cplx s = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        s += es.vectors(i, k) * std::polar(1.0, -es.values[k] * dt) * std::conj(es.vectors(j, k));
      u(i, j) = s;
    }
  return UnitaryPropagator(std::move(u));
}

inline StateVector apply(const UnitaryPropagator& u, const StateVector& psi) {
  if (u.size() != psi.size()) throw invalid_input("apply: dimension mismatch");
  std::vector<cplx> out(psi.size(), cplx{0.0, 0.0});
  for (std::size_t i = 0; i < psi.size(); ++i)
    for (std::size_t j = 0; j < psi.size(); ++j) out[i] += u(i, j) * psi[j];
  return StateVector::from_normalized(std::move(out));
}

/// <a|b>, conjugate-linear in a.
inline cplx overlap(const StateVector& a, const StateVector& b) {
  if (a.size() != b.size()) throw invalid_input("overlap: dimension mismatch");
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

}  // namespace bangoff
