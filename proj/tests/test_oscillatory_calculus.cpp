#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pulse_optics/oscillatory_calculus.hpp"

using namespace pulse_optics;

namespace {

PhaseSet three_phases() { return {{-0.5, 1.0, -1.0}, {0, 1, 2}}; }

SignalHandle gauss(double Theta, int n, double c = 0.0, double a = 1.0) {
  return make_handle(ThetaSignal::from_function(Theta, n, [=](double t) { return a * std::exp(-(t - c) * (t - c)); }));
}

SignalHandle dgauss(double Theta, int n, double c = 0.0, double a = 1.0) {
  return make_handle(
      ThetaSignal::from_function(Theta, n, [=](double t) { return -2 * a * (t - c) * std::exp(-(t - c) * (t - c)); }));
}

TypeFFunction mixed(double Theta = 16.0, int n = 512) {
  TypeFFunction F{three_phases(), {}};
  F.add_single(0, gauss(Theta, n), 0, 1.0);                                // resonant
  F.add_single(0, dgauss(Theta, n, 1.0), 1, 0.7);                          // single, other phase
  F.add_product(1, gauss(Theta, n), 1, gauss(Theta, n, 0.5), 1, -0.3);    // resonant product
  F.add_product(1, gauss(Theta, n), 1, dgauss(Theta, n), 2, 0.4);         // one phase own
  F.add_product(2, dgauss(Theta, n, -1.0), 0, gauss(Theta, n), 1, 1.3);   // transversal
  F.add_product(2, gauss(Theta, n), 0, dgauss(Theta, n, 0.3), 0, 0.5);    // same foreign phase
  return F;
}

double max_abs(const Vec& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(AveragingOperator, Idempotent) {
  const auto F = mixed();
  const auto E1 = apply_E(F);
  const auto E2 = apply_E(E1);
  EXPECT_EQ(E1.terms.size(), 2u);
  EXPECT_TRUE(E1.terms == E2.terms);
  EXPECT_TRUE(apply_E(complement_E(F)).terms.empty());
}

TEST(AveragingOperator, OwnPhaseUnchangedAndDistinctProductDropped) {
  TypeFFunction F{three_phases(), {}};
  F.add_single(0, gauss(16, 512), 0, 1.0);
  EXPECT_TRUE(apply_E(F).terms == F.terms);
  TypeFFunction G{three_phases(), {}};
  G.add_product(0, gauss(16, 512), 0, gauss(16, 512), 1, 1.0);
  EXPECT_TRUE(apply_E(G).terms.empty());
}

TEST(AveragingOperator, MatchesBruteForceAverage) {
  const auto F = mixed();
  const auto E = apply_E(F);
  const double T = 1e3;
  for (double th : {-0.7, 0.0, 0.4})
    for (double xi : {0.0, 0.9}) {
      for (int j = 0; j < 3; ++j) {
        const double avg = average_along(F, j, th, xi, T, 200000);
        EXPECT_NEAR(avg, E.component(j, th, xi), 1e-2) << "j=" << j << " th=" << th << " xi=" << xi;
      }
    }
}

TEST(RInfinity, SingleTermClosedFormMatchesQuadrature) {
  // f(theta0 + omega_1 xi) r_0 with alpha = omega_1 - omega_0 = 1.5
  TypeFFunction F{three_phases(), {}};
  F.add_single(0, dgauss(32.0, 4096, 0.2), 1, 1.0);
  const auto U = apply_R_infinity(F);
  using boost::math::quadrature::gauss_kronrod;
  auto f = [](double z) { return -2 * (z - 0.2) * std::exp(-(z - 0.2) * (z - 0.2)); };
  for (int k = 0; k < 20; ++k) {
    const double th = -2.0 + 0.2 * k, xi = 0.05 * k - 0.5;
    const double z0 = th - 0.5 * xi;
    const double ref = -gauss_kronrod<double, 61>::integrate([&](double s) { return f(z0 + 1.5 * s); }, xi, xi + 40.0, 15, 1e-13);
    const double got = U.component(0, th, xi);
    EXPECT_LT(std::abs(got - ref), 1e-4 * std::max(std::abs(ref), 1e-3)) << k;
  }
}

TEST(RInfinity, CutoffRouteUsesMomentZeroPrimitive) {
  TypeFFunction F{three_phases(), {}};
  F.add_single(0, gauss(64.0, 4096), 2, 2.0);
  const double p = 0.3;
  const auto U = apply_R_infinity(F, p);
  const auto star = decaying_primitive(moment_zero(*gauss(64.0, 4096), p));
  for (double z : {-3.0, -0.5, 0.0, 1.2, 4.0}) EXPECT_NEAR(U.component(0, z, 0.0), 2.0 / (-0.5) * star(z, 5), 1e-13);
}

TEST(RInfinity, ZeroAndResonantContract) {
  TypeFFunction F{three_phases(), {}};
  EXPECT_TRUE(apply_R_infinity(F).empty());
  EXPECT_EQ(apply_R_infinity(F).component(1, 0.3, 0.2), 0.0);
  F.add_single(1, gauss(16, 512), 1, 1.0);
  try {
    apply_R_infinity(F);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Contract);
  }
}

TEST(RInfinity, FastOperatorIdentityOnMixedFunction) {
  // Zero-mean signals wherever a primitive is needed.
  const double Theta = 16.0;
  const int n = 512;
  TypeFFunction F = complement_E(mixed(Theta, n));
  F.terms[3].f = make_handle(moment_zero(product(*F.terms[3].f, *F.terms[3].g), 0.3));
  F.terms[3].kind = TypeFTerm::Kind::Single;
  F.terms[3].g = nullptr;
  const auto U = apply_R_infinity(F);
  EXPECT_EQ(U.quad.size(), 1u);
  std::vector<double> th, xi;
  for (int k = 0; k < 12; ++k) {
    th.push_back(-3.0 + 0.5 * k);
    xi.push_back(-2.0 + 0.4 * k);
  }
  EXPECT_LT(fast_operator_residual(U, F, th, xi), 1e-4);
}

TEST(RInfinity, ClosedPiecesAreNonResonant) {
  TypeFFunction F = complement_E(mixed());
  F.terms.pop_back();
  const auto U = apply_R_infinity(F);
  EXPECT_TRUE(apply_E(U.closed_as_type_f()).terms.empty());
  const auto C = U.closed_as_type_f();
  for (int j = 0; j < 3; ++j) EXPECT_LT(std::abs(average_along(C, j, 0.3, 0.0, 1e3, 100000)), 1e-2);
}

TEST(TransversalIntegral, GaussianOracle) {
  const double Theta = 16.0;
  const int n = 4096;
  const auto g = gauss(Theta, n);
  const double v = transversal_integral(*g, *g, 0.0, 1.0, -1.0, 0.0, 0.0);
  EXPECT_NEAR(v, -std::sqrt(M_PI / 8), 1e-6);
  EXPECT_EQ(transversal_integral(*g, ThetaSignal::zeros(Theta, n), 0.0, 1.0, -1.0, 0.0, 0.0), 0.0);
  EXPECT_THROW(transversal_integral(*g, *g, 0.0, 1.0, 1.0, 0.0, 0.0), Error);
}

TEST(TransversalIntegral, BoundedInXiWithPeakNearOrigin) {
  const auto g = gauss(16.0, 2048);
  double best = 0.0, arg = -1.0;
  for (int k = 0; k <= 400; ++k) {
    const double xi = 0.25 * k;
    const double v = std::abs(transversal_integral(*g, *g, 0.0, 1.0, -1.0, 0.0, xi));
    if (v > best) {
      best = v;
      arg = xi;
    }
  }
  EXPECT_LT(arg, 1.0);
  EXPECT_NEAR(best, std::sqrt(M_PI / 8), 1e-6);
}

TEST(MomentZeroScaling, SqrtPErrorBand) {
  const auto g = ThetaSignal::from_function(8192.0, 65536, [](double t) { return std::exp(-t * t); });
  std::vector<double> r;
  for (double p : {1e-1, 3e-2, 1e-2, 3e-3}) {
    const auto gp = moment_zero(g, p);
    EXPECT_LT(std::abs(gp.integral()), 1e-14);
    r.push_back((g - gp).hs_norm(1.0) / std::sqrt(p));
  }
  EXPECT_LT(*std::max_element(r.begin(), r.end()) / *std::min_element(r.begin(), r.end()), 3.0);
}

TEST(MomentZeroScaling, PrimitiveInverseP) {
  std::vector<double> r;
  for (double p : {1e-1, 3e-2, 1e-2, 3e-3}) {
    const auto g = ThetaSignal::from_function(64.0 / p, 4096, [p](double t) { return std::exp(-(p * t) * (p * t)); });
    const auto gp = moment_zero(g, p);
    r.push_back(decaying_primitive(gp).hs_norm(1.0) * p / gp.hs_norm(1.0));
  }
  EXPECT_LT(*std::max_element(r.begin(), r.end()) / *std::min_element(r.begin(), r.end()), 3.0);
}

TEST(MomentZeroScaling, NontransversalReplacementSqrtP) {
  const double Theta = 8192.0;
  const int n = 65536;
  const auto s = ThetaSignal::from_function(Theta, n, [](double t) { return std::exp(-t * t); });
  const auto tau = ThetaSignal::from_function(Theta, n, [](double t) { return std::exp(-(t - 0.5) * (t - 0.5)); });
  const auto dtau = theta_derivative(tau);
  const auto raw = product(s, dtau);
  std::vector<double> r;
  for (double p : {1e-1, 3e-2, 1e-2, 3e-3})
    r.push_back((raw - nontransversal_product(s, dtau, p)).hs_norm(1.0) / (s.hs_norm(1.0) * tau.hs_norm(1.0) * std::sqrt(p)));
  EXPECT_LT(*std::max_element(r.begin(), r.end()) / *std::min_element(r.begin(), r.end()), 3.0);
}

namespace {

struct Ex1Profiles {
  SystemSpec sys;
  PhaseTable tab;
  InteractionCoeffs coef;
  ProfileSet prof;
};

Ex1Profiles ex1_profiles(const SystemSpec& sys, double Theta, int ntheta) {
  Ex1Profiles e{sys, phase_table(sys, Vec::Constant(1, 1.0)), {}, {}};
  e.coef = interaction_coefficients(e.sys, e.tab);
  BoundaryPulse G;
  G.amplitude = Vec::Constant(2, 0.2);
  G.center = 0.0;
  GridSpec g;
  g.T = 0.5;
  g.X = 0.5;
  g.Theta = Theta;
  g.nt = 9;
  g.nx = 9;
  g.ntheta = ntheta;
  ProfileOptions opt;
  opt.scheme = ThetaScheme::Upwind3;
  e.prof = solve_profiles(e.sys, e.tab, e.coef, G, g, opt);
  return e;
}

}  // namespace

TEST(BuildCorrector, LinearDecoupledIsZero) {
  const auto e = ex1_profiles(ex1_system(false), 16.0, 256);
  const auto U = build_corrector(e.prof, e.coef, e.tab, {0.5, 2, 2, 1e-9});
  for (int i = 0; i < U.nt(); ++i)
    for (int j = 0; j < U.nx(); ++j) EXPECT_TRUE(U.rep(i, j).empty());
  EXPECT_EQ(max_abs(U.evaluate(e.tab, 0.05, 0.3, 0.1)), 0.0);
}

TEST(BuildCorrector, FastOperatorReproducesModifiedSource) {
  const auto e = ex1_profiles(ex1_coupled_system(), 16.0, 512);
  ProfileSet Pn = e.prof;
  Pn.sigma = e.prof.previous;
  const double p = 0.4;
  const auto F = corrector_source(Pn, e.prof, e.coef, e.tab, p, 0.4, 0.2);
  EXPECT_FALSE(F.terms.empty());
  EXPECT_TRUE(apply_E(F).terms.empty());
  const auto U = apply_R_infinity(F);
  std::vector<double> th, xi;
  for (int k = 0; k < 10; ++k) {
    th.push_back(-4.0 + 0.9 * k);
    xi.push_back(-1.0 + 0.5 * k);
  }
  EXPECT_LT(fast_operator_residual(U, F, th, xi), 1e-4);
}

TEST(BuildCorrector, GrowthBoundedByInverseP) {
  const auto e = ex1_profiles(ex1_coupled_system(), 64.0, 2048);
  std::vector<double> lp, ls;
  for (double p : {0.4, 0.2, 0.1, 0.05}) {
    const auto U = build_corrector(e.prof, e.coef, e.tab, {p, 8, 8, 1e-9});
    double sup = 0.0;
    for (int i = 0; i < U.nt(); ++i)
      for (int j = 0; j < U.nx(); ++j)
        for (int q = -256; q <= 256; ++q) sup = std::max(sup, max_abs(U.rep(i, j).evaluate(0.125 * q, 0.0)));
    lp.push_back(std::log(p));
    ls.push_back(std::log(sup));
  }
  const double slope = -(ls.back() - ls.front()) / (lp.back() - lp.front());
  RecordProperty("slope", std::to_string(slope));
  EXPECT_GE(slope, -0.05);
  EXPECT_LE(slope, 1.3);
}
