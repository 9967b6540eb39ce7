#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pulse_optics/theta_signal.hpp"

using namespace pulse_optics;

namespace {

ThetaSignal gaussian(double Theta = 16.0, int n = 1024, double c = 0.0) {
  return ThetaSignal::from_function(Theta, n, [c](double t) { return std::exp(-(t - c) * (t - c)); });
}

}  // namespace

TEST(ThetaSignal, RejectsNonPowerOfTwo) {
  EXPECT_THROW(ThetaSignal(1.0, std::vector<double>(100, 0.0)), Error);
}

TEST(ThetaSignal, IntegralAndNormsOfGaussian) {
  const auto g = gaussian();
  EXPECT_NEAR(g.integral(), std::sqrt(M_PI), 1e-12);
  EXPECT_NEAR(g.l2(), std::pow(M_PI / 2, 0.25), 1e-12);
  // H^1: int (1 + m^2) |g^|^2 dm / (2 pi) = |g|^2 + |g'|^2
  const double l2sq = std::sqrt(M_PI / 2), d2 = std::sqrt(M_PI / 2);  // int (2t)^2 e^{-2t^2} = sqrt(pi/2)
  EXPECT_NEAR(g.hs_norm(1.0), std::sqrt(l2sq + d2), 1e-10);
  EXPECT_LT(g.endpoint_magnitude(), 1e-100);
}

TEST(ThetaSignal, InterpolationOrders) {
  const auto g = gaussian(16.0, 2048);
  for (double t : {-0.37, 0.0123, 1.1, 2.9}) {
    EXPECT_NEAR(g(t, 3), std::exp(-t * t), 2e-6);
    EXPECT_NEAR(g(t, 5), std::exp(-t * t), 2e-8);
  }
  EXPECT_EQ(g(17.0), 0.0);
  EXPECT_EQ(g(-16.5), 0.0);
}

TEST(ThetaSignal, SpectralDerivative) {
  const auto g = gaussian();
  const auto d = theta_derivative(g);
  for (int q = 0; q < g.size(); q += 7) {
    const double t = g.theta(q);
    EXPECT_NEAR(d.samples()[q], -2 * t * std::exp(-t * t), 1e-12);
  }
}

TEST(MomentZero, InactiveCutoffLeavesHighBandUnchanged) {
  // cos(8 theta) e^{-theta^2/50}: spectrum concentrated near |m| = 8, far above 2p.
  const auto s = ThetaSignal::from_function(64.0, 4096, [](double t) { return std::cos(8 * t) * std::exp(-t * t / 50); });
  const auto sp = moment_zero(s, 0.5);
  double diff = 0.0;
  for (int q = 0; q < s.size(); ++q) diff = std::max(diff, std::abs(sp.samples()[q] - s.samples()[q]));
  EXPECT_LT(diff, 1e-12);
}

TEST(MomentZero, ZeroMeanAndTwiceAppliedIsChiSquared) {
  const auto g = gaussian(64.0, 4096);
  const double p = 0.1;
  const auto gp = moment_zero(g, p);
  const auto gpp = moment_zero(gp, p);
  EXPECT_LT(std::abs(gp.integral()), 1e-14);
  EXPECT_LT(std::abs(gpp.integral()), 1e-14);
  EXPECT_EQ(gp.spectrum()[0], cplx(0.0));
  for (int k = 0; k < g.size(); ++k) {
    const double chi = cutoff_chi(g.frequency(k), p);
    EXPECT_NEAR(std::abs(gpp.spectrum()[k] - chi * chi * g.spectrum()[k]), 0.0, 1e-12);
  }
}

TEST(MomentZero, CutoffKernels) {
  for (auto k : {CutoffKernel::Smoothstep5, CutoffKernel::SmoothExp}) {
    EXPECT_EQ(cutoff_phi(0.5, k), 1.0);
    EXPECT_EQ(cutoff_phi(1.0, k), 1.0);
    EXPECT_EQ(cutoff_phi(2.0, k), 0.0);
    EXPECT_NEAR(cutoff_phi(1.5, k), 0.5, 1e-15);
    EXPECT_EQ(cutoff_chi(0.0, 0.3, k), 0.0);
    EXPECT_EQ(cutoff_chi(0.7, 0.3, k), 1.0);
  }
  EXPECT_THROW(moment_zero(gaussian(), 1.5), Error);
}

TEST(DecayingPrimitive, MatchesCumulativeQuadrature) {
  // Band-limited, zero-mean pulse: derivative of a Gaussian.
  auto fn = [](double t) { return -2 * t * std::exp(-t * t); };
  const auto s = ThetaSignal::from_function(32.0, 4096, fn);
  const auto P = decaying_primitive(s);
  // oracle: cumulative Gauss-Kronrod integration of the integrand, minus its mean
  using boost::math::quadrature::gauss_kronrod;
  std::vector<double> cum(s.size());
  double acc = 0.0;
  for (int q = 0; q < s.size(); ++q) {
    if (q > 0) acc += gauss_kronrod<double, 15>::integrate(fn, s.theta(q - 1), s.theta(q), 0, 0);
    cum[q] = acc;
  }
  // the primitive vanishing at -Theta is the cumulative integral itself
  double diff = 0.0;
  for (int q = 0; q < s.size(); ++q) diff = std::max(diff, std::abs(P.samples()[q] - cum[q]));
  EXPECT_LT(diff, 1e-8);
  for (int q = 0; q < s.size(); q += 5) EXPECT_NEAR(P.samples()[q], std::exp(-s.theta(q) * s.theta(q)), 1e-10);
  EXPECT_LT(P.endpoint_magnitude(), 1e-12);
}

TEST(DecayingPrimitive, DifferentiatesBack) {
  const auto gp = moment_zero(gaussian(64.0, 4096), 0.2);
  const auto P = decaying_primitive(gp);
  const auto back = theta_derivative(P);
  double diff = 0.0;
  for (int q = 0; q < gp.size(); ++q) diff = std::max(diff, std::abs(back.samples()[q] - gp.samples()[q]));
  EXPECT_LT(diff, 1e-10);
  EXPECT_LT(std::abs(P.samples().front()), 1e-14);
  // the far end only sees the slowly decaying tail of the removed low band
  EXPECT_LT(P.endpoint_magnitude(), 1e-4 * P.sup());
}

TEST(DecayingPrimitive, ZeroAndContract) {
  const auto z = decaying_primitive(ThetaSignal::zeros(8.0, 64));
  EXPECT_EQ(z.sup(), 0.0);
  try {
    decaying_primitive(gaussian());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Contract);
  }
}

TEST(NontransversalProduct, ZeroMeanAndZeroInput) {
  const auto g = gaussian(64.0, 4096);
  const auto dg = theta_derivative(gaussian(64.0, 4096, 1.0));
  EXPECT_LT(std::abs(nontransversal_product(g, dg, 0.1).integral()), 1e-14);
  EXPECT_EQ(nontransversal_product(ThetaSignal::zeros(64.0, 4096), dg, 0.1).sup(), 0.0);
}
