#include <gtest/gtest.h>

#include <numbers>

#include "bangoff/core.hpp"
#include "bangoff/model.hpp"
#include "bangoff/random.hpp"
#include "oracle.hpp"

using namespace bangoff;
using std::numbers::pi;

namespace {

HermitianOperator random_hermitian(Rng& rng, std::size_t n) {
  Matrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = uniform(rng, -3.0, 3.0);
    for (std::size_t j = i + 1; j < n; ++j) {
      m(i, j) = cplx(uniform(rng, -3.0, 3.0), uniform(rng, -3.0, 3.0));
      m(j, i) = std::conj(m(i, j));
    }
  }
  return HermitianOperator(m);
}

double max_diff(const Matrix& a, const Matrix& b) { return (a - b).max_abs(); }

oracle::Mat to_oracle(const HermitianOperator& h) {
  oracle::Mat m(h.size());
  for (std::size_t i = 0; i < h.size(); ++i)
    for (std::size_t j = 0; j < h.size(); ++j) m(i, j) = h(i, j);
  return m;
}

}  // namespace

TEST(Expm, ZeroGeneratorIsIdentity) {
  const auto u = expm_hermitian(HermitianOperator::zero(2), 7.3);
  EXPECT_LT(max_diff(u.matrix(), Matrix::identity(2)), 1e-15);
}

TEST(Expm, PauliXQuarterTurn) {
  const auto u = expm_hermitian(pauli::x(), pi / 2);
  const Matrix expected(2, {0.0, cplx(0, -1), cplx(0, -1), 0.0});
  EXPECT_LT(max_diff(u.matrix(), expected), 1e-15);
}

TEST(Expm, RabiPopulation) {
  const auto h = (-1.0) * pauli::z() + (4.0 / 3.0) * pauli::x();
  const auto u = expm_hermitian(h, 3 * pi / 10);
  EXPECT_NEAR(std::norm(u(1, 0)), oracle::rabi(1.0, 4.0 / 3.0, 3 * pi / 10), 1e-14);
  EXPECT_NEAR(std::norm(u(1, 0)), 0.64, 1e-12);
}

TEST(Expm, RejectsBadDurations) {
  EXPECT_THROW(expm_hermitian(pauli::x(), -1e-3), invalid_input);
  EXPECT_THROW(expm_hermitian(pauli::x(), std::nan("")), invalid_input);
  EXPECT_THROW(HermitianOperator(Matrix(2, {1.0, std::nan(""), std::nan(""), 0.0})), invalid_input);
}

TEST(Expm, UnitarityOnRandomHamiltonians) {
  Rng rng = make_rng(11);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const std::size_t n = k % 2 == 0 ? 2 : 3;
    const auto h = random_hermitian(rng, n);
    worst = std::max(worst, expm_hermitian(h, uniform(rng, 0.0, 10.0)).unitarity_defect());
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(Expm, Composition) {
  Rng rng = make_rng(12);
  for (int k = 0; k < 500; ++k) {
    const auto h = random_hermitian(rng, k % 2 == 0 ? 2 : 3);
    const double a = uniform(rng, 0.0, 5.0), b = uniform(rng, 0.0, 5.0);
    const auto lhs = expm_hermitian(h, a + b);
    const auto rhs = expm_hermitian(h, a) * expm_hermitian(h, b);
    ASSERT_LT(max_diff(lhs.matrix(), rhs.matrix()), 1e-12);
  }
}

TEST(Expm, ClosedFormMatchesSpectralPath) {
  Rng rng = make_rng(13);
  for (int k = 0; k < 1000; ++k) {
    const auto h = random_hermitian(rng, 2);
    const double t = uniform(rng, 0.0, 10.0);
    ASSERT_LT(max_diff(expm_hermitian(h, t).matrix(), expm_hermitian_spectral(h, t).matrix()), 1e-12);
  }
}

TEST(Expm, AgreesWithTaylorOracle) {
  Rng rng = make_rng(14);
  for (int k = 0; k < 300; ++k) {
    const auto h = random_hermitian(rng, k % 2 == 0 ? 2 : 3);
    const double t = uniform(rng, 0.0, 4.0);
    const auto u = expm_hermitian(h, t);
    const auto ref = oracle::expm(to_oracle(h), t);
    for (std::size_t i = 0; i < h.size(); ++i)
      for (std::size_t j = 0; j < h.size(); ++j) ASSERT_LT(std::abs(u(i, j) - ref(i, j)), 1e-11);
  }
}

TEST(Apply, IdentityAndBitFlip) {
  const StateVector psi({cplx(0.6, 0.0), cplx(0.0, 0.8)});
  const auto same = apply(UnitaryPropagator::identity(2), psi);
  EXPECT_LT(std::abs(same[0] - psi[0]) + std::abs(same[1] - psi[1]), 1e-15);

  const auto flipped = apply(expm_hermitian(pauli::x(), pi / 2), StateVector::basis(2, 0));
  EXPECT_LT(std::abs(flipped[0]), 1e-15);
  EXPECT_LT(std::abs(flipped[1] - cplx(0, -1)), 1e-15);
  EXPECT_NEAR(std::abs(overlap(StateVector::basis(2, 1), flipped)), 1.0, 1e-15);
}

TEST(Apply, RabiAndNormPreservation) {
  const auto u = expm_hermitian((-1.0) * pauli::z() + (4.0 / 3.0) * pauli::x(), 3 * pi / 10);
  const auto out = apply(u, StateVector::basis(2, 0));
  EXPECT_NEAR(std::norm(out[1]), 0.64, 1e-12);
  EXPECT_NEAR(out.norm(), 1.0, 1e-12);
  EXPECT_THROW(apply(u, StateVector::basis(3, 0)), invalid_input);
}

TEST(Overlap, Examples) {
  const StateVector a({cplx(0.6, 0.0), cplx(0.0, 0.8)});
  EXPECT_NEAR(std::abs(overlap(a, a)), 1.0, 1e-15);
  EXPECT_EQ(overlap(StateVector::basis(2, 0), StateVector::basis(2, 1)), cplx(0.0, 0.0));
  const StateVector b({cplx(1.0, 0.0), cplx(0.0, 1.0)});
  EXPECT_NEAR(overlap(StateVector::basis(2, 0), b).real(), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_THROW(overlap(a, StateVector::basis(3, 0)), invalid_input);
}

TEST(StateVectorTest, NormalizedOnConstruction) {
  const StateVector s({cplx(3.0, 0.0), cplx(0.0, 4.0)});
  EXPECT_NEAR(s.norm(), 1.0, 1e-12);
  EXPECT_THROW(StateVector({cplx(0.0, 0.0)}), invalid_input);
  EXPECT_THROW(StateVector(std::vector<cplx>{}), invalid_input);
}

TEST(HermitianOperatorTest, RejectsNonHermitian) {
  EXPECT_THROW(HermitianOperator(Matrix(2, {0.0, 1.0, 2.0, 0.0})), invalid_input);
}

TEST(Eigh, Examples) {
  const auto d = eigh(HermitianOperator(Matrix(3, {1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0})));
  EXPECT_NEAR(d.values[0], -1.0, 1e-15);
  EXPECT_NEAR(d.values[1], 0.0, 1e-15);
  EXPECT_NEAR(d.values[2], 1.0, 1e-15);
  const auto x = eigh(pauli::x());
  EXPECT_NEAR(x.values[0], -1.0, 1e-14);
  EXPECT_NEAR(x.values[1], 1.0, 1e-14);
}

TEST(Eigh, ReconstructsAndOrthonormal) {
  Rng rng = make_rng(15);
  std::vector<HermitianOperator> cases{three_level(1, 1, 2, 1).hamiltonian(1.0)};
  for (int k = 0; k < 200; ++k) cases.push_back(random_hermitian(rng, 3));
  for (const auto& h : cases) {
    const auto es = eigh(h);
    const std::size_t n = h.size();
    Matrix lam(n);
    for (std::size_t i = 0; i < n; ++i) lam(i, i) = es.values[i];
    const Matrix rebuilt = es.vectors * lam * es.vectors.adjoint();
    ASSERT_LT(max_diff(rebuilt, h.matrix()), 1e-12);
    ASSERT_LT(max_diff(es.vectors.adjoint() * es.vectors, Matrix::identity(n)), 1e-12);
    for (std::size_t i = 1; i < n; ++i) ASSERT_LE(es.values[i - 1], es.values[i]);
  }
}

TEST(Eigh, DegenerateSpectrumStillOrthonormal) {
  const auto es = eigh(HermitianOperator(Matrix::identity(3)));
  EXPECT_LT(max_diff(es.vectors.adjoint() * es.vectors, Matrix::identity(3)), 1e-12);
}
