#include <gtest/gtest.h>

#include <random>

#include "pulse_optics/hyperbolic_model.hpp"

using namespace pulse_optics;

namespace {

Vec beta1(double tau) { return Vec::Constant(1, tau); }

// 2-D symmetric pair with eigenvalues +-|xi|.
SystemSpec wave_pair() {
  SystemSpec s;
  s.N = 2;
  s.d = 2;
  s.p = 1;
  Mat a1(2, 2), a2(2, 2);
  a1 << 1, 0, 0, -1;
  a2 << 0, 1, 1, 0;
  s.A = {a1, a2};
  s.dA.assign(2, std::vector<Mat>(2, Mat::Zero(2, 2)));
  s.F0 = Mat::Zero(2, 2);
  s.B0 = Mat(1, 2);
  s.B0 << 1, 0;
  return s;
}

// Acoustics in 2-D: eigenvalues 0, +-|xi|.
SystemSpec acoustic() {
  SystemSpec s;
  s.N = 3;
  s.d = 2;
  s.p = 1;
  Mat a1 = Mat::Zero(3, 3), a2 = Mat::Zero(3, 3);
  a1(0, 1) = a1(1, 0) = 1;
  a2(0, 2) = a2(2, 0) = 1;
  s.A = {a1, a2};
  s.dA.assign(2, std::vector<Mat>(3, Mat::Zero(3, 3)));
  s.F0 = Mat::Zero(3, 3);
  s.B0 = Mat(1, 3);
  s.B0 << 1, 0, 0;
  return s;
}

}  // namespace

TEST(ValidateSystem, Ex1Passes) {
  const auto rep = validate_system(ex1_system());
  EXPECT_TRUE(rep.pass());
  EXPECT_EQ(rep.find("boundary_count")->measured, 2.0);
}

TEST(ValidateSystem, CharacteristicBoundaryFails) {
  auto s = ex1_system();
  s.A[0] = Mat(Eigen::Vector3d(1, 0, 1).asDiagonal());
  const auto rep = validate_system(s);
  EXPECT_FALSE(rep.find("noncharacteristic")->pass);
}

TEST(ValidateSystem, RankDeficientBoundaryFails) {
  auto s = ex1_system();
  s.B0 << 1, 1, 0, 1, 1, 0;
  EXPECT_FALSE(validate_system(s).find("boundary_rank")->pass);
}

TEST(ValidateSystem, StructuralErrors) {
  auto s = ex1_system();
  s.A[0] = Mat::Identity(3, 2);
  EXPECT_THROW(validate_system(s), Error);
  auto s2 = ex1_system();
  s2.p = 3;
  s2.B0 = Mat::Identity(3, 3);
  try {
    validate_system(s2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Structural);
  }
}

TEST(DispersionRoots, Ex1ClosedForm) {
  const auto s = ex1_system();
  const auto r = dispersion_roots(s, beta1(1.0));
  ASSERT_EQ(r.size(), 3u);
  const double a[3] = {2, -1, 1};
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(r[i].omega, -1.0 / a[i], 1e-12);
    EXPECT_EQ(r[i].nu, 1);
  }
}

TEST(DispersionRoots, ScalarShift) {
  SystemSpec s = ex1_system();
  s.A[0] = Mat::Identity(3, 3);
  s.B0 = Mat::Identity(2, 3);
  const auto r = dispersion_roots(s, beta1(1.0));
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r[0].omega, -1.0, 1e-12);
  EXPECT_EQ(r[0].nu, 3);
}

TEST(DispersionRoots, Homogeneity) {
  const auto s = ex1_system();
  const auto r1 = dispersion_roots(s, beta1(1.0));
  for (double c : {0.3, 2.0, 7.5}) {
    const auto rc = dispersion_roots(s, beta1(c));
    ASSERT_EQ(rc.size(), r1.size());
    for (size_t i = 0; i < r1.size(); ++i) EXPECT_NEAR(rc[i].omega, c * r1[i].omega, 1e-10);
  }
}

TEST(DispersionRoots, ComplexRootsRejected) {
  const auto s = wave_pair();
  Vec beta(2);
  beta << 0.5, 1.0;  // |tau| < |eta|
  try {
    dispersion_roots(s, beta);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OutsideHyperbolicRegion);
  }
}

TEST(PhaseTable, Ex1Modes) {
  const auto s = ex1_system();
  const auto t = phase_table(s, beta1(1.0));
  ASSERT_EQ(t.M(), 3);
  const double a[3] = {2, -1, 1};
  for (int m = 0; m < 3; ++m) {
    EXPECT_NEAR(t.modes[m].group_velocity(0), a[m], 1e-8);
    EXPECT_NEAR(t.modes[m].kappa, 1.0 / a[m], 1e-12);
    Mat e = Mat::Zero(3, 3);
    e(m, m) = 1.0;
    EXPECT_LT((t.projectors[m] - e).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_EQ(t.incoming_set, (std::vector<int>{0, 2}));
  EXPECT_EQ(t.outgoing_set, (std::vector<int>{1}));
}

TEST(PhaseTable, ProjectorAlgebraOnRandomSystems) {
  std::mt19937 gen(7);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    // A_1 = S diag(a) S^{-1} with distinct real a, two positive.
    Mat S(4, 4);
    for (int i = 0; i < 16; ++i) S(i / 4, i % 4) = nd(gen);
    S += 3.0 * Mat::Identity(4, 4);
    Vec a(4);
    a << 1.5, 0.7, -0.9, -2.1;
    SystemSpec s;
    s.N = 4;
    s.d = 1;
    s.p = 2;
    s.A = {S * a.asDiagonal() * S.inverse()};
    s.dA.assign(1, std::vector<Mat>(4, Mat::Zero(4, 4)));
    s.F0 = Mat::Zero(4, 4);
    s.B0 = Mat::Identity(2, 4);
    const auto t = phase_table(s, beta1(1.0));
    Mat sum = Mat::Zero(4, 4);
    for (int m = 0; m < t.M(); ++m) {
      sum += t.projectors[m];
      for (int n = 0; n < t.M(); ++n) {
        const Mat prod = t.projectors[m] * t.projectors[n];
        const Mat expect = m == n ? t.projectors[m] : Mat::Zero(4, 4);
        EXPECT_LT((prod - expect).cwiseAbs().maxCoeff(), 1e-12);
      }
      // L(d phi_m) r = 0 and l . r biorthogonal
      const Mat Lm = Mat::Identity(4, 4) + t.modes[m].omega * s.A[0];
      EXPECT_LT((Lm * t.modes[m].r).norm(), 1e-10);
      // Im A_d^{-1} L(d phi_m) is the kernel of P_m
      for (int k = 0; k < 3; ++k) {
        Vec w(4);
        for (int i = 0; i < 4; ++i) w(i) = nd(gen);
        EXPECT_LT((t.projectors[m] * s.A[0].inverse() * Lm * w).norm(), 1e-10);
      }
    }
    EXPECT_LT((sum - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((t.L * t.R - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
    int nin = 0;
    for (int m : t.incoming_set) nin += t.modes[m].nu;
    EXPECT_EQ(nin, 2);
  }
}

TEST(HyperbolicRegion, Ex1) {
  EXPECT_TRUE(hyperbolic_region_test(ex1_system(), 1.0, Vec()).hyperbolic);
  EXPECT_THROW(hyperbolic_region_test(ex1_system(), 0.0, Vec()), Error);
}

TEST(HyperbolicRegion, WavePairClosedForm) {
  // A_2^{-1}(tau + eta A_1) has eigenvalues +-sqrt(tau^2 - eta^2).
  const auto s = wave_pair();
  EXPECT_TRUE(hyperbolic_region_test(s, 1.0, Vec::Constant(1, 0.5)).hyperbolic);
  EXPECT_FALSE(hyperbolic_region_test(s, 0.5, Vec::Constant(1, 1.0)).hyperbolic);
}

TEST(Glancing, Ex1NeverGlancing) {
  const auto s = ex1_system();
  EXPECT_FALSE(glancing_test(s, 1.0, Vec()));
  EXPECT_FALSE(glancing_test(s, -0.3, Vec()));
}

TEST(Glancing, AcousticTangency) {
  const auto s = acoustic();
  EXPECT_TRUE(glancing_test(s, -1.0, Vec::Constant(1, 1.0)));
  EXPECT_FALSE(glancing_test(s, -2.0, Vec::Constant(1, 1.0)));
  EXPECT_FALSE(glancing_test(s, 1e4, Vec::Constant(1, 1.0)));
}

TEST(StableSubspace, Ex1Coordinates) {
  const auto s = ex1_system();
  for (double g : {1.0, 10.0, 1e3}) {
    FrequencyPoint z{1.0, g, Vec()};
    const CMat E = stable_subspace(s, z);
    ASSERT_EQ(E.cols(), 2);
    CMat ref = CMat::Zero(3, 2);
    ref(0, 0) = 1.0;
    ref(2, 1) = 1.0;
    EXPECT_LT(principal_angle(E, ref), 1e-7);
  }
}

TEST(StableSubspace, RejectsNonPositiveGamma) {
  EXPECT_THROW(stable_subspace(ex1_system(), FrequencyPoint{1.0, 0.0, Vec()}), Error);
}

TEST(StableSubspace, AdvectionPairDimensionOne) {
  SystemSpec s;
  s.N = 2;
  s.d = 1;
  s.p = 1;
  s.A = {Mat(Eigen::Vector2d(1.0, -3.0).asDiagonal())};
  s.dA.assign(1, std::vector<Mat>(2, Mat::Zero(2, 2)));
  s.F0 = Mat::Zero(2, 2);
  s.B0 = Mat(1, 2);
  s.B0 << 1, 1;
  EXPECT_EQ(stable_subspace(s, FrequencyPoint{0.3, 0.8, Vec()}).cols(), 1);
}

TEST(StableSubspace, RandomFrequenciesHaveDimensionP) {
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> ut(-5.0, 5.0), ug(0.0, 10.0);
  for (const auto& s : {ex1_system(), wave_pair()}) {
    for (int i = 0; i < 100; ++i) {
      FrequencyPoint z;
      z.tau = ut(gen);
      z.gamma = 10.0 - ug(gen);  // (0, 10]
      z.eta = Vec::Constant(s.d - 1, ut(gen));
      EXPECT_EQ(stable_subspace(s, z).cols(), s.p);
    }
  }
}

TEST(StableSubspace, LimitMatchesIncomingModes) {
  const auto s = ex1_system();
  const auto t = phase_table(s, beta1(1.0));
  CMat Rin(3, 2);
  Rin.col(0) = t.modes[0].r.col(0).cast<cplx>();
  Rin.col(1) = t.modes[2].r.col(0).cast<cplx>();
  EXPECT_LT(principal_angle(stable_subspace(s, FrequencyPoint{1.0, 1e-6, Vec()}), Rin), 1e-4);

  const auto w = wave_pair();
  Vec beta(2);
  beta << 1.0, 0.5;
  const auto tw = phase_table(w, beta);
  ASSERT_EQ(tw.incoming_set.size(), 1u);
  const CMat r = tw.modes[tw.incoming_set[0]].r.cast<cplx>();
  FrequencyPoint z{1.0, 1e-6, Vec::Constant(1, 0.5)};
  EXPECT_LT(principal_angle(stable_subspace(w, z), r), 1e-4);
}

TEST(UniformStability, Ex1IsOne) {
  const auto res = uniform_stability_scan(ex1_system());
  EXPECT_NEAR(res.min_sigma, 1.0, 1e-10);
  EXPECT_TRUE(res.uniformly_stable);
}

TEST(UniformStability, RankDeficientRestriction) {
  auto s = ex1_system();
  s.B0 << 1, 0, 0, 1, 0, 0;
  const auto res = uniform_stability_scan(s);
  EXPECT_LT(res.min_sigma, 1e-10);
  EXPECT_FALSE(res.uniformly_stable);
}

TEST(UniformStability, DeterminantCrossCheck) {
  auto s = ex1_system();
  s.B0 << 0, 1, 1, 1, 1, 0;
  // [B e1, B e3] = [[0,1],[1,0]]: |det| = 1, orthogonal, so sigma_min = 1.
  Mat Br(2, 2);
  Br.col(0) = s.B0.col(0);
  Br.col(1) = s.B0.col(2);
  EXPECT_NEAR(std::abs(Br.determinant()), 1.0, 1e-14);
  const auto res = uniform_stability_scan(s, {16, 1e-6, 1e-6});
  EXPECT_NEAR(res.min_sigma, min_singular_value(Br), 1e-10);
}
