#include <gtest/gtest.h>

#include <numbers>

#include "bangoff/controls.hpp"
#include "bangoff/model.hpp"
#include "bangoff/objective.hpp"
#include "oracle.hpp"

using namespace bangoff;
using std::numbers::pi;

namespace {

constexpr double kM = 4.0 / 3.0;

ControlSystem case1() { return two_level(1.0, kM, StateVector::basis(2, 1)); }
ControlSystem case2() { return two_level(1.0, kM, equator_target()); }
ControlSystem tl() { return three_level(1, 1, 2, 1); }

double oracle_fidelity(const ControlSystem& s, const BangOffControl& c) {
  const auto seg = oracle::segments(c.type.str(), c.durations, c.amplitude);
  if (s.dimension() == 2) {
    std::vector<oracle::C> target{s.target[0], s.target[1]};
    return oracle::fidelity([&](double u) { return oracle::two_level_h(s.params.E, u); }, {1.0, 0.0}, target, seg);
  }
  return oracle::fidelity([&](double u) { return oracle::three_level_h(1, 1, 2, u); }, {1.0, 0.0, 0.0},
                          {0.0, 0.0, 1.0}, seg);
}

}  // namespace

TEST(Propagate, ZeroDurationReturnsInitial) {
  const BangOffControl c{BangOffType::parse("P"), {0.0}, kM};
  const auto psi = propagate(case1(), c, 0.0);
  EXPECT_EQ(psi[0], cplx(1.0, 0.0));
  EXPECT_EQ(psi[1], cplx(0.0, 0.0));
  EXPECT_EQ(fidelity(case1(), c, 0.0), 0.0);
}

TEST(Propagate, SingleBangMatchesRabi) {
  for (double T : {0.1, 0.5, 3 * pi / 10, 1.0, 2.7, 5.0}) {
    const BangOffControl c{BangOffType::parse("P"), {T}, kM};
    EXPECT_NEAR(fidelity(case1(), c, T), 0.64 * std::pow(std::sin(5.0 * T / 3.0), 2), 1e-13) << T;
  }
}

TEST(Propagate, AnalyticCase1Witness) {
  const auto a = analytic_case1(1.0, kM);
  const BangOffControl c{BangOffType::parse("PN"), {a.T1, a.T2}, kM};
  EXPECT_GE(fidelity(case1(), c, a.T_qsl), 1.0 - 1e-12);
  const BangOffControl rounded{BangOffType::parse("PN"), {0.6505, 1.2345}, kM};
  EXPECT_GE(fidelity(case1(), rounded, 1.885), 1.0 - 1e-6);
}

TEST(Propagate, DurationMismatchRejected) {
  const BangOffControl c{BangOffType::parse("PN"), {0.5, 0.5}, kM};
  EXPECT_THROW(propagate(case1(), c, 1.5), invalid_input);
  const PiecewiseControl p{{kM, 0.0}, 0.5};
  EXPECT_THROW(propagate(case1(), p, 2.0), invalid_input);
  const PiecewiseControl over{{2.0 * kM}, 1.0};
  EXPECT_THROW(propagate(case1(), over, 1.0), invalid_input);
}

TEST(Propagate, AgreesWithOracleOnRandomControls) {
  Rng rng = make_rng(41);
  for (const auto& s : {case1(), case2(), tl()}) {
    const auto types = enumerate_types(4);
    for (int k = 0; k < 100; ++k) {
      const auto c = random_bangoff(types[uniform_index(rng, types.size())], uniform(rng, 0.1, 4.0), s.bound, rng);
      ASSERT_NEAR(fidelity(s, c, c.total()), oracle_fidelity(s, c), 1e-11);
    }
  }
}

TEST(Propagate, NormPreservedForAllKinds) {
  Rng rng = make_rng(42);
  const auto types = enumerate_types(3);
  for (int k = 0; k < 100; ++k) {
    const auto s = k % 2 ? tl() : case2();
    const auto c = random_bangoff(types[uniform_index(rng, types.size())], 2.0, s.bound, rng);
    ASSERT_NEAR(propagate(s, c, c.total()).norm(), 1.0, 1e-12);
    const auto p = to_piecewise(c, 37);
    ASSERT_NEAR(propagate(s, p, p.total()).norm(), 1.0, 1e-12);
    CrabControl cr{{{0.3, -0.2}, {0.1, 0.4}}, {2.0, 4.5}, 2.0, s.bound};
    ASSERT_NEAR(propagate(s, cr, 2.0).norm(), 1.0, 1e-12);
  }
}

TEST(Propagate, SegmentSplitting) {
  Rng rng = make_rng(43);
  for (int k = 0; k < 100; ++k) {
    const auto s = k % 2 ? tl() : case1();
    const auto c = random_bangoff(BangOffType::parse("PNP"), 2.0, s.bound, rng);
    const double a = uniform(rng, 0.0, c.durations[1]);
    const BangOffControl split{BangOffType::parse("PN0NP"), {c.durations[0], a, 0.0, c.durations[1] - a, c.durations[2]},
                               s.bound};
    ASSERT_NEAR(fidelity(s, c, c.total()), fidelity(s, split, split.total()), 1e-12);
  }
}

TEST(Propagate, ThreeLevelMirrorSymmetry) {
  Rng rng = make_rng(44);
  const auto s = tl();
  const auto types = enumerate_types(4);
  for (int k = 0; k < 100; ++k) {
    const auto c = random_bangoff(types[uniform_index(rng, types.size())], uniform(rng, 0.2, 4.0), s.bound, rng);
    ASSERT_NEAR(fidelity(s, c, c.total()), fidelity(s, negate(c), c.total()), 1e-12);
  }
  EXPECT_TRUE(mirror_symmetric(s));
  EXPECT_FALSE(mirror_symmetric(case2()));
}

TEST(Propagate, PiecewiseMatchesBangOffWhenAligned) {
  const auto s = case2();
  const BangOffControl c{BangOffType::parse("P0N"), {0.6, 0.2, 0.4}, kM};
  const auto p = to_piecewise(c, 60);
  EXPECT_NEAR(fidelity(s, c, 1.2), fidelity(s, p, 1.2), 1e-12);
}

TEST(Propagate, CrabSlicingSecondOrder) {
  Rng rng = make_rng(45);
  const auto s = tl();
  for (int k = 0; k < 20; ++k) {
    const double T = 2.85;
    CrabControl c;
    c.T = T;
    c.M = s.bound;
    c.frequencies = random_crab_frequencies(3, T, rng);
    for (int n = 0; n < 3; ++n) c.coefficients.emplace_back(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3));
    auto e = [&](std::size_t n) { return detail::orthogonal_weight(s.target, propagate(s, c, T, n).amplitudes()); };
    const double d1 = e(1000) - e(2000), d2 = e(2000) - e(4000);
    ASSERT_LT(std::abs(d1), 1e-6);
    if (std::abs(d1) > 1e-12) {
      ASSERT_NEAR(d1 / d2, 4.0, 0.2) << k;
    }
  }
}

TEST(Fidelity, TargetEqualsInitial) {
  const auto s = two_level(1.0, kM, StateVector::basis(2, 0));
  EXPECT_EQ(fidelity(s, BangOffControl{BangOffType::parse("N"), {0.0}, kM}, 0.0), 1.0);
}

TEST(Fidelity, EvaluatorsAgree) {
  Rng rng = make_rng(46);
  const auto s = case2();
  const BangOffEvaluator ev(s);
  const auto types = enumerate_types(3);
  for (int k = 0; k < 100; ++k) {
    const auto c = random_bangoff(types[uniform_index(rng, types.size())], 1.5, kM, rng);
    ASSERT_NEAR(ev.fidelity(c.type, c.durations), fidelity(s, c, 1.5), 1e-13);
  }
  const SlotEvaluator slots(s, 0.05);
  const PiecewiseControl p{{kM, 0.0, -kM, kM, 0.0}, 0.05};
  EXPECT_NEAR(slots.fidelity(p.values), fidelity(s, p, p.total()), 1e-13);
}

TEST(Fidelity, InfidelityResolvedBelowEpsilon) {
  const auto a = analytic_case1(1.0, kM);
  const BangOffControl c{BangOffType::parse("PN"), {a.T1, a.T2}, kM};
  const double e = infidelity(case1(), c, a.T_qsl);
  EXPECT_GE(e, 0.0);
  EXPECT_LT(e, 1e-20);
  const BangOffControl off{BangOffType::parse("PN"), {a.T1 + 1e-9, a.T2 - 1e-9}, kM};
  const double e2 = infidelity(case1(), off, a.T_qsl);
  EXPECT_GT(e2, 0.0);
  EXPECT_LT(e2, 1e-15);
}

TEST(Bures, Examples) {
  EXPECT_EQ(bures(1.0), 0.0);
  EXPECT_NEAR(bures(0.0), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(bures(0.25), 1.0, 1e-15);
  EXPECT_NO_THROW(bures(1.0 + 5e-13));
  EXPECT_THROW(bures(1.1), invalid_input);
  EXPECT_THROW(bures(-0.01), invalid_input);
}

TEST(Bures, MonotoneAndConsistent) {
  double prev = bures(0.0);
  for (int k = 1; k <= 1000; ++k) {
    const double F = k / 1000.0;
    const double d = bures(F);
    ASSERT_LE(d, prev);
    ASSERT_NEAR(fidelity_from_bures(d), F, 1e-12);
    ASSERT_NEAR(bures_from_infidelity(1.0 - F), d, 1e-7 * std::max(d, 1e-3));
    prev = d;
  }
  for (double e : {1e-30, 1e-20, 1e-16, 1e-12}) EXPECT_NEAR(bures_from_infidelity(e), std::sqrt(e), 1e-3 * std::sqrt(e));
}

TEST(Evaluate, ReportInvariant) {
  Rng rng = make_rng(47);
  const auto types = enumerate_types(2);
  for (int k = 0; k < 200; ++k) {
    const auto s = k % 2 ? tl() : case1();
    const auto c = random_bangoff(types[uniform_index(rng, types.size())], 2.0, s.bound, rng);
    const auto r = evaluate(s, c, 2.0);
    ASSERT_GE(r.fidelity, 0.0);
    ASSERT_LE(r.fidelity, 1.0 + 1e-12);
    ASSERT_NEAR(r.bures, std::sqrt(2.0 * (1.0 - std::sqrt(r.fidelity))), 1e-12);
    ASSERT_NEAR(r.infidelity, 1.0 - r.fidelity, 1e-15);
    ASSERT_EQ(r.T, 2.0);
  }
}

TEST(Pruning, DriftEigenstates) {
  EXPECT_TRUE(is_eigenstate(case1().drift, StateVector::basis(2, 0)));
  EXPECT_FALSE(is_eigenstate(case1().drift, equator_target()));
  const auto r = default_pruning(tl());
  EXPECT_FALSE(r.drop_leading_off);
  EXPECT_TRUE(r.drop_trailing_off);
  EXPECT_TRUE(r.mirror_representative);
}
