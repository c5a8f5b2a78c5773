#include <gtest/gtest.h>

#include <cmath>

#include "toepclt/integrals.hpp"

using namespace toepclt;

namespace {

constexpr std::int64_t kN = 200'000;

PairPartition pairs(std::vector<std::vector<int>> b) { return PairPartition(Partition::from_blocks(std::move(b))); }

// Exact limits of the quadratic statistics: tr(T^2) is a weighted sum of
// independent a_j^2, so Var follows from E a^4 - 1 = kappa - 1 directly.
double var_omega2(double b, double kappa) { return 4.0 * (kappa - 1.0) * (1.0 - b + b * b / 3.0); }
double var_zeta1(double b, double kappa) { return 2.0 * (kappa - 1.0) * (1.0 - b + b * b / 3.0); }

void expect_close(const MCEstimate& e, double truth, double k = 4.0) {
  EXPECT_NEAR(e.value, truth, k * e.std_error + 1e-12) << "se=" << e.std_error;
}

}  // namespace

TEST(MomentIntegrand, SinglePair) {
  auto f = build_moment_integrand(pairs({{1, 2}}), 0.7);
  EXPECT_EQ(f.dim, 1);
  EXPECT_FALSE(f.has_y0);
  ASSERT_EQ(f.indicators.size(), 2u);
  EXPECT_EQ(f.indicators[0].coeffs, std::vector<int>{1});
  EXPECT_EQ(f.indicators[1].coeffs, std::vector<int>{0});
  EXPECT_FALSE(f.delta.has_value());
}

TEST(MomentIntegrand, CrossingPartialSums) {
  auto f = build_moment_integrand(pairs({{1, 3}, {2, 4}}), 1.0);
  ASSERT_EQ(f.indicators.size(), 4u);
  EXPECT_EQ(f.indicators[0].coeffs, (std::vector<int>{1, 0}));
  EXPECT_EQ(f.indicators[1].coeffs, (std::vector<int>{1, 1}));
  EXPECT_EQ(f.indicators[2].coeffs, (std::vector<int>{0, 1}));
  EXPECT_EQ(f.indicators[3].coeffs, (std::vector<int>{0, 0}));
}

TEST(MomentIntegrand, ZeroBandIsTheBoxVolume) {
  for (const auto& pi : enumerate_pair_partitions(6)) {
    auto e = mc_evaluate(build_moment_integrand(pi, 0.0), 1000, 9);
    EXPECT_EQ(e.value, 8.0);
    EXPECT_EQ(e.std_error, 0.0);
  }
}

TEST(MomentIntegrand, RejectsOutOfRangeB) {
  EXPECT_THROW((void)build_moment_integrand(pairs({{1, 2}}), 1.5), ContractViolation);
}

TEST(CovarianceIntegrand, TypeOneDelta) {
  auto f = build_covariance_integrand(pairs({{1, 3}, {2, 4}}), 2, 2, SignVariant::minus, 1.0);
  EXPECT_EQ(f.dim, 2);
  EXPECT_TRUE(f.has_y0);
  ASSERT_TRUE(f.delta.has_value());
  EXPECT_EQ(*f.delta, (std::vector<int>{1, 1}));
  EXPECT_THROW((void)build_covariance_integrand(pairs({{1, 2}, {3, 4}}), 2, 2, SignVariant::minus, 1.0),
               ContractViolation);
}

TEST(CovarianceIntegrand, TypeTwoTau) {
  auto pi = FourBlockPartition(Partition::from_blocks({{1, 2, 3, 4}}), 2, 2);
  auto f = build_covariance_integrand(pi, SignVariant::minus, 1.0);
  EXPECT_EQ(f.dim, 1);
  EXPECT_FALSE(f.delta.has_value());
  EXPECT_EQ(f.indicators[0].coeffs, std::vector<int>{1});
  EXPECT_EQ(f.indicators[1].coeffs, std::vector<int>{0});
  EXPECT_EQ(f.indicators[0].base, BaseVariable::x0);
  EXPECT_EQ(f.indicators[2].base, BaseVariable::y0);
}

TEST(CovarianceIntegrand, PlusNegatesSecondGroup) {
  auto pi = pairs({{1, 4}, {2, 3}, {5, 6}});
  auto minus = build_covariance_integrand(pi, 3, 3, SignVariant::minus, 0.5);
  auto plus = build_covariance_integrand(pi, 3, 3, SignVariant::plus, 0.5);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(minus.indicators[k], plus.indicators[k]);
  for (std::size_t k = 3; k < 6; ++k) {
    auto neg = minus.indicators[k].coeffs;
    for (auto& c : neg) c = -c;
    EXPECT_EQ(plus.indicators[k].coeffs, neg);
  }
  EXPECT_EQ(minus.delta, plus.delta);
}

TEST(ResolveDelta, Substitution) {
  auto f = build_covariance_integrand(pairs({{1, 3}, {2, 4}}), 2, 2, SignVariant::minus, 1.0);
  auto g = resolve_delta(f);
  EXPECT_EQ(g.dim, 1);  // x0, y0 and x2 remain
  EXPECT_FALSE(g.delta.has_value());
  // x1 := -x2: partial sums x1, x1 + x2 become -x2, 0.
  EXPECT_EQ(g.indicators[0].coeffs, std::vector<int>{-1});
  EXPECT_EQ(g.indicators[1].coeffs, std::vector<int>{0});
  const auto& range = g.indicators.back();
  EXPECT_EQ(range.base, BaseVariable::none);
  EXPECT_EQ(range.range, FormRange::region);
  EXPECT_EQ(range.coeffs, std::vector<int>{-1});
}

TEST(ResolveDelta, DifferenceForm) {
  Integrand f;
  f.dim = 3;
  f.b = 1.0;
  f.indicators.push_back({BaseVariable::x0, {1, 0, 0}, true, FormRange::unit});
  f.delta = std::vector<int>{1, 0, -1};
  auto g = resolve_delta(f);
  EXPECT_EQ(g.indicators[0].coeffs, (std::vector<int>{0, 1}));  // x1 := x3
  Integrand none;
  none.dim = 1;
  EXPECT_THROW((void)resolve_delta(none), ContractViolation);
  none.delta = std::vector<int>{0};
  EXPECT_THROW((void)resolve_delta(none), ContractViolation);
}

TEST(MonteCarlo, VolumeAndDeterminism) {
  Integrand ones;
  ones.dim = 1;
  auto e = mc_evaluate(ones, 100, 1);
  EXPECT_EQ(e.value, 2.0);
  EXPECT_EQ(e.std_error, 0.0);
  EXPECT_THROW((void)mc_evaluate(ones, 0, 1), ContractViolation);

  auto f = build_moment_integrand(pairs({{1, 2}}), 1.0);
  auto a = mc_evaluate(f, kN, 42), b = mc_evaluate(f, kN, 42);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.std_error, b.std_error);
  expect_close(a, 1.0, 3.0);
  EXPECT_GE(a.value, 0.0);
  EXPECT_LE(a.value, 2.0);
}

TEST(MonteCarlo, NonzeroHyperplaneGivesExactZero) {
  Integrand f;
  f.dim = 2;
  f.hyperplanes.push_back({1, -1});
  auto e = mc_evaluate(f, 10, 3);
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.std_error, 0.0);
  f.delta = std::vector<int>{1, 1};
  EXPECT_THROW((void)mc_evaluate(f, 10, 3), ContractViolation);
}

TEST(SamplingRegion, InverseCdf) {
  SamplingRegion r({{0.0, 0.25}, {0.5, 0.75}});
  EXPECT_DOUBLE_EQ(r.length(), 1.0);
  for (double u = 0.0; u < 1.0; u += 0.001) EXPECT_TRUE(r.contains(r.sample(u))) << u;
  EXPECT_FALSE(r.contains(0.4));
  EXPECT_THROW(SamplingRegion({{0.2, 0.1}}), ContractViolation);
  EXPECT_THROW(SamplingRegion(std::vector<std::pair<double, double>>{}), ContractViolation);
  EXPECT_THROW(SamplingRegion({{0.0, 0.5}, {0.4, 0.6}}), ContractViolation);
}

TEST(LimitMoment, ZeroBand) {
  for (int k = 1; k <= 4; ++k) {
    auto e = limit_moment(k, 0.0, 1000, 5);
    EXPECT_DOUBLE_EQ(e.value, std::pow(2.0, k) * static_cast<double>(double_factorial(2 * k - 1)));
  }
}

TEST(LimitMoment, SecondMomentIsTwoMinusB) {
  for (double b : {0.25, 0.5, 1.0}) expect_close(limit_moment(1, b, kN, 7), 2.0 - b);
}

TEST(LimitMoment, SparseSecondMoment) {
  // With B = [-1/2, 1/2]: the integral of (1 - |x|) over B.
  expect_close(limit_moment(1, 1.0, kN, 8, SamplingRegion({{0.0, 0.5}})), 0.75);
}

TEST(LimitCovariance, OddSumIsExactlyZero) {
  CovarianceQuery q;
  q.p = 2;
  q.q = 3;
  auto e = limit_covariance(q).total();
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.std_error, 0.0);
  q.p = 1;
  EXPECT_THROW((void)limit_covariance(q), ContractViolation);
}

TEST(LimitCovariance, QuadraticMatchesExactVariance) {
  for (double b : {0.0, 0.5, 1.0}) {
    for (double kappa : {1.0, 3.0, 1.8}) {
      CovarianceQuery q;
      q.b = b;
      q.kappa = kappa;
      q.samples = kN;
      expect_close(limit_covariance(q).total(), var_omega2(b, kappa));
      q.flavor = CovarianceFlavor::hermitian;
      expect_close(limit_covariance(q).total(), var_omega2(b, kappa));
      q.flavor = CovarianceFlavor::hankel;
      q.p = q.q = 1;
      expect_close(limit_covariance(q).total(), var_zeta1(b, kappa));
    }
  }
}

TEST(LimitCovariance, LiteralRuleKeepsCoincidentPairings) {
  CovarianceQuery q;
  q.b = 0.0;
  q.rule = TypeIRule::literal;
  auto e = limit_covariance(q);
  EXPECT_EQ(e.type_one_terms, 2);
  EXPECT_EQ(e.type_one_excluded, 0);
  EXPECT_DOUBLE_EQ(e.type_one.value, 8.0);
  q.rule = TypeIRule::exclude_coincident;
  EXPECT_EQ(limit_covariance(q).type_one_excluded, 2);
}

TEST(LimitCovariance, Symmetric) {
  for (auto [p, q] : {std::pair{2, 4}, std::pair{3, 5}}) {
    CovarianceQuery a;
    a.p = p;
    a.q = q;
    a.b = 0.6;
    a.samples = 50'000;
    a.seed = 11;
    CovarianceQuery c = a;
    c.p = q;
    c.q = p;
    c.seed = 12;
    auto x = limit_covariance(a).total(), y = limit_covariance(c).total();
    EXPECT_NEAR(x.value, y.value, 3.0 * std::hypot(x.std_error, y.std_error) + 1e-12) << p << "," << q;
  }
}

TEST(VariancePolynomial, Bilinearity) {
  CovarianceQuery base;
  base.b = 0.0;
  const std::vector<double> x2{0, 0, 1}, twice{0, 0, 2}, both{0, 0, 1, 1};
  const double s22 = limit_variance_polynomial(x2, base).value;
  EXPECT_DOUBLE_EQ(s22, var_omega2(0.0, 3.0));
  EXPECT_DOUBLE_EQ(limit_variance_polynomial(twice, base).value, 4.0 * s22);
  CovarianceQuery s33 = base;
  s33.p = s33.q = 3;
  // The delta substitution leaves a range indicator, so only agreement within MC error.
  const auto mixed = limit_variance_polynomial(both, base);
  const auto s33v = limit_covariance(s33).total();
  EXPECT_NEAR(mixed.value, s22 + s33v.value, 4.0 * std::hypot(mixed.std_error, s33v.std_error));
  EXPECT_THROW((void)limit_variance_polynomial(std::vector<double>{0, 0, 0}, base), ContractViolation);
  EXPECT_THROW((void)limit_variance_polynomial(std::vector<double>{0, 1, 1}, base), ContractViolation);
}

TEST(Wishart, ZeroBandMoments) {
  const int cases[][3] = {{1, 1, 2}, {2, 1, 8}, {1, 2, 8}, {3, 1, 48}, {2, 2, 384}};
  for (const auto& c : cases) {
    auto w = wishart_limit_moment(c[0], c[1], 0.0, 1000, 3);
    EXPECT_DOUBLE_EQ(w.value.value, c[2]);
    int fact = 1;
    for (int i = 2; i <= c[0] * c[1]; ++i) fact *= i;
    EXPECT_EQ(w.surviving_partitions, fact);
  }
}

TEST(Wishart, SurvivorsMatchSignPairing) {
  // A pairing survives iff every pair joins positions of opposite sign.
  for (auto [p, s] : {std::pair{1, 3}, std::pair{2, 2}, std::pair{3, 1}, std::pair{2, 3}}) {
    int expect = 0;
    for (const auto& pi : enumerate_pair_partitions(2 * p * s)) {
      bool ok = true;
      for (const auto& b : pi.partition().blocks()) ok = ok && wishart_sign(b[0], s) != wishart_sign(b[1], s);
      expect += ok;
    }
    EXPECT_EQ(wishart_limit_moment(p, s, 0.5, 10, 1).surviving_partitions, expect);
  }
}

TEST(Riemann, GridSumMatchesContinuum) {
  // n = 200, band = 100: b = 1/2, M2 = 3/2 up to O(1/band^2).
  auto f = build_moment_integrand(pairs({{1, 2}}), 0.5);
  EXPECT_NEAR(riemann_sum(f, 200, 100), 1.5, 1e-3);
  auto g = build_moment_integrand(pairs({{1, 3}, {2, 4}}), 0.5);
  auto e = mc_evaluate(g, kN, 2);
  EXPECT_NEAR(riemann_sum(g, 200, 100), e.value, 4.0 * e.std_error + 2e-3);
  EXPECT_THROW((void)riemann_sum(f, 200, 50), ContractViolation);
}
