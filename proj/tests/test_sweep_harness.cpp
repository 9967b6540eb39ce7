#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pulse_optics/config.hpp"
#include "pulse_optics/sweep_harness.hpp"

using namespace pulse_optics;

namespace {

std::vector<double> eps4() { return {0.1, 0.05, 0.025, 0.0125}; }

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

SweepReport synthetic_report(int rows) {
  SweepReport r;
  r.name = "synthetic";
  const auto e = eps4();
  for (int i = 0; i < rows; ++i) {
    SweepRow row;
    row.eps = e[i];
    row.p = std::pow(e[i], 2.0 / 13);
    row.err_leading_sup = 0.3 * e[i];
    row.err_corrected_sup = 0.2 * e[i] * e[i];
    row.err_L2 = 0.1 * e[i];
    row.ok = true;
    r.rows.push_back(row);
  }
  r.fit_leading = detail::try_fit(r.rows, false, 1e-6);
  r.fit_corrected = detail::try_fit(r.rows, true, 1e-6);
  return r;
}

SweepConfig tiny_config(const SystemSpec& s) {
  SweepConfig c;
  c.system = s;
  c.pulse.amplitude = Vec::Constant(2, 0.2);
  c.pulse.onset = -1.0;
  c.profile_grid.T = 0.6;
  c.profile_grid.X = 1.05;
  c.profile_grid.Theta = 16.0;
  c.profile_grid.nt = 33;
  c.profile_grid.nx = 33;
  c.profile_grid.ntheta = 512;
  c.T = 0.6;
  c.X = 1.05;
  c.ppw = 12;
  c.n_snap = 4;
  c.window.t_hi = 0.6;
  c.window.x_hi = 1.0;
  c.eps = {0.1, 0.05};
  return c;
}

}  // namespace

TEST(CutoffRule, ExponentForOneDimension) {
  EXPECT_EQ(m1_for(1), 4);
  EXPECT_EQ(m1_for(2), 4);
  EXPECT_EQ(m1_for(3), 5);
  EXPECT_DOUBLE_EQ(default_b(1), 2.0 / 13);
  SweepConfig c;
  c.system.d = 1;
  EXPECT_NEAR(c.p_of(1.0 / 80), std::pow(1.0 / 80, 2.0 / 13), 1e-15);
}

TEST(FitRate, LinearDataGivesSlopeOne) {
  std::vector<double> e = eps4(), r;
  for (double x : e) r.push_back(x);
  const RateFit f = fit_rate(e, r);
  EXPECT_NEAR(f.slope, 1.0, 1e-12);
  EXPECT_NEAR(f.stderr_, 0.0, 1e-10);
  EXPECT_EQ(f.used, 4);
}

TEST(FitRate, ThirteenthRoot) {
  std::vector<double> e = eps4(), r;
  for (double x : e) r.push_back(2.0 * std::pow(x, 1.0 / 13));
  EXPECT_NEAR(fit_rate(e, r).slope, 1.0 / 13, 1e-12);
}

TEST(FitRate, FloorOutlierExcluded) {
  std::vector<double> e = {0.1, 0.05, 0.025, 0.0125, 0.00625}, r;
  for (double x : e) r.push_back(x * x);
  r.back() = 1e-9;
  const RateFit f = fit_rate(e, r, 1e-6);
  EXPECT_EQ(f.used, 4);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
}

TEST(FitRate, InsufficientData) {
  try {
    fit_rate({0.1, 0.05, 0.025}, {1e-3, 1e-7, 1e-8}, 1e-6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientData);
  }
}

TEST(EmitReport, EmptyReportIsHeaderOnly) {
  SweepReport r;
  r.name = "empty";
  const std::string dir = ::testing::TempDir() + "sweep_empty";
  const auto files = emit_report(r, dir);
  ASSERT_EQ(files.size(), 3u);
  EXPECT_EQ(slurp(files[0]), "eps,p,err_leading_sup,err_corrected_sup,err_L2,floor,status\n");
}

TEST(EmitReport, FourRowsAndTwoSlopes) {
  const SweepReport r = synthetic_report(4);
  const std::string dir = ::testing::TempDir() + "sweep_four";
  const auto files = emit_report(r, dir, "four");
  const std::string csv = slurp(files[0]);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  const json j = json::parse(slurp(files[1]));
  EXPECT_NEAR(j.at("fit_leading").at("slope").get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(j.at("fit_corrected").at("slope").get<double>(), 2.0, 1e-12);
  EXPECT_EQ(j.at("rows").size(), 4u);
  EXPECT_TRUE(j.contains("timestamp"));
  EXPECT_TRUE(j.contains("version"));
}

TEST(EmitReport, SvgIsWellFormed) {
  const std::string svg = detail::sweep_svg(synthetic_report(4));
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("<svg xmlns=\"http://www.w3.org/2000/svg\""), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(std::count(svg.begin(), svg.end(), '<'), std::count(svg.begin(), svg.end(), '>'));
  EXPECT_EQ(std::count(svg.begin(), svg.end(), '"') % 2, 0);
}

TEST(EmitReport, CsvHasNoRuntimeOrTimestamp) {
  SweepReport a = synthetic_report(3), b = synthetic_report(3);
  b.rows[0].runtime_total = 123.0;
  EXPECT_EQ(sweep_csv(a), sweep_csv(b));
}

TEST(SweepAssessment, VerdictLogic) {
  SweepReport r = synthetic_report(4);
  EXPECT_TRUE(assess_sweep(r).passed());
  r.rows[2].err_leading_sup = 1.2 * r.rows[1].err_leading_sup;
  EXPECT_FALSE(assess_sweep(r).decreasing);
  r = synthetic_report(4);
  r.rows[3].err_corrected_sup = 2 * r.rows[3].err_leading_sup;
  EXPECT_FALSE(assess_sweep(r).corrector_helps);
  r = synthetic_report(4);
  r.rows[1].ok = false;
  EXPECT_FALSE(assess_sweep(r).all_rows_ok);
}

TEST(SweepConfigChecks, RejectsBadWindowAndOrder) {
  SweepConfig c = tiny_config(ex1_system());
  c.eps = {0.05, 0.1};
  EXPECT_THROW(check_sweep_config(c), Error);
  c = tiny_config(ex1_system());
  c.window.x_hi = 1.5;
  EXPECT_THROW(check_sweep_config(c), Error);
  EXPECT_NO_THROW(check_sweep_config(tiny_config(ex1_system())));
}

TEST(SweepConfigChecks, HashTracksContent) {
  const SweepConfig a = tiny_config(ex1_system());
  SweepConfig b = a;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.ppw = 13;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(RunSweep, LinearLeadingOrderHitsFloor) {
  // leading order is exact for the linear constant-coefficient problem; 96 points per wavelength
  // put the reference solver's own error below 1e-6
  SweepConfig c = tiny_config(ex1_system(false));
  c.eps = {0.1};
  c.ppw = 96;
  c.profile_grid.ntheta = 2048;
  const SweepReport r = run_sweep(c);
  ASSERT_TRUE(r.rows[0].ok) << r.rows[0].failure;
  EXPECT_LE(r.rows[0].err_leading_sup, 1e-6);
  EXPECT_TRUE(r.rows[0].floor);
  EXPECT_EQ(r.rows[0].err_corrected_sup, r.rows[0].err_leading_sup);
  EXPECT_FALSE(r.fit_leading.ok);
  EXPECT_NE(r.fit_leading.reason.find("insufficient"), std::string::npos);
}

TEST(RunSweep, ReproducibleCsvAndNonlinearDecay) {
  const SweepConfig c = tiny_config(ex1_coupled_system());
  const SweepReport a = run_sweep(c);
  const SweepReport b = run_sweep(c);
  EXPECT_EQ(sweep_csv(a), sweep_csv(b));
  ASSERT_TRUE(a.rows[0].ok && a.rows[1].ok);
  EXPECT_LT(a.rows[1].err_leading_sup, a.rows[0].err_leading_sup);
  EXPECT_GT(a.rows[1].err_leading_sup, 1e-6);
}

TEST(RunSweep, FailedRowKeepsReport) {
  SweepConfig c = tiny_config(ex1_coupled_system());
  c.exact.validity = 1e-4;
  const SweepReport r = run_sweep(c);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) {
    EXPECT_FALSE(row.ok);
    EXPECT_NE(row.failure.find("validity"), std::string::npos);
  }
  EXPECT_FALSE(assess_sweep(r).passed());
  EXPECT_NE(sweep_csv(r).find("failed"), std::string::npos);
}

TEST(RunConfig, ParsesPresetAndSections) {
  const json j = json::parse(R"({
    "name": "demo", "preset": "ex1_coupled",
    "pulse": {"amplitude": [0.2, 0.2], "rise": 0.02, "center": 5},
    "profile": {"grid": {"T": 1, "X": 2.05, "Theta": 16, "nt": 64, "nx": 32, "ntheta": 256}, "scheme": "upwind3"},
    "exact": {"T": 1, "X": 2.05, "ppw": 16},
    "sweep": {"eps": [0.1, 0.05, 0.025], "window": {"x_hi": 2.0}}
  })");
  const RunConfig c = run_config_from_json(j);
  EXPECT_EQ(c.name, "demo");
  EXPECT_EQ(c.system.N, 3);
  EXPECT_EQ(c.profile.scheme, ThetaScheme::Upwind3);
  EXPECT_EQ(c.profile_grid.ntheta, 256);
  EXPECT_EQ(c.ppw, 16);
  EXPECT_EQ(c.eps.size(), 3u);
  EXPECT_NO_THROW(check_sweep_config(sweep_config(c)));
  EXPECT_THROW(run_config_from_json(json::parse(R"({"preset": "nope"})")), Error);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"preset": "ex1", "profile": {"scheme": "weno"}})")), Error);
}
