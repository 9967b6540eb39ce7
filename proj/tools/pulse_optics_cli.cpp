// pulse-optics: structural checks, profile solves, reference solves and convergence sweeps from a config file.
// Exit status: 0 when every enabled assertion passes, 1 when one fails, 2 on usage or configuration errors.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pulse_optics/pulse_optics.hpp"

using namespace pulse_optics;
namespace fs = std::filesystem;

namespace {

void print(const CheckResult& r) {
  std::printf("%s %s  (%.2f s)\n", r.passed() ? "PASS" : "FAIL", r.title.c_str(), r.seconds);
  for (const auto& a : r.asserts)
    std::printf("    [%s] %s: %s\n", a.pass ? "ok" : "FAILED", a.name.c_str(), a.detail.c_str());
  if (!r.error.empty()) std::printf("    [ERROR] %s\n", r.error.c_str());
  std::fflush(stdout);
}

std::string out_path(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

CheckResult run_check(const RunConfig& c) {
  return detail::timed(0, "check " + c.name, 0.0, [&](CheckResult& r) {
    const auto& e = c.expect;
    structural_assertions(r, c.system, c.beta, e.roots, e.incoming, e.p, e.tol, c.stability_density);
  });
}

CheckResult run_profiles(const RunConfig& c, const std::string& out) {
  return detail::timed(0, "profiles " + c.name, 0.0, [&](CheckResult& r) {
    const PhaseTable tab = phase_table(c.system, c.beta);
    const InteractionCoeffs coef = interaction_coefficients(c.system, tab);
    const ProfileSet P = solve_profiles(c.system, tab, coef, c.pulse, c.profile_grid, c.profile);
    profile_assertions(r, P, tab, c.profile, c.pulse.onset);
    if (!out.empty()) {
      save_profiles(out_path(out, c.name + ".profiles.bin"), P);
      write_convergence_csv(out_path(out, c.name + ".convergence.csv"), P);
    }
  });
}

CheckResult run_exact(const RunConfig& c, double eps, const std::string& out) {
  return detail::timed(0, "exact " + c.name + " at eps " + detail::fmt(eps), 0.0, [&](CheckResult& r) {
    const FineGrid g = fine_grid(c.system, eps, c.T, c.X, c.ppw, c.cfl, c.n_snap, c.beta(0));
    const FineSolution sol = solve_exact(c.system, c.pulse, eps, g, c.exact);
    const ResidualNorms res = residual_norms(sol, c.system, c.pulse);
    r.expect("boundary residual <= 1e-10", res.bc_residual_sup <= 1e-10, detail::fmt(res.bc_residual_sup));
    r.expect("Newton converged", sol.newton_max_iterations <= c.exact.newton_max,
             "max iterations " + std::to_string(sol.newton_max_iterations));
    r.expect("within validity ball", sol.max_eps_u <= c.exact.validity,
             "max eps|u| " + detail::fmt(sol.max_eps_u) + ", CFL " + detail::fmt(sol.max_cfl));
    if (!out.empty()) {
      save_fine_solution(out_path(out, c.name + ".fine.bin"), sol);
      std::ofstream f(out_path(out, c.name + ".residual.csv"));
      f << "eps,nx,nt,pde_residual_sup,bc_residual_sup\n";
      f.precision(10);
      f << eps << ',' << g.nx << ',' << g.nt << ',' << res.pde_residual_sup << ',' << res.bc_residual_sup << '\n';
    }
  });
}

CheckResult run_sweep_cmd(const RunConfig& c, const std::string& out) {
  return detail::timed(0, "sweep " + c.name, 0.0, [&](CheckResult& r) {
    const SweepReport rep = run_sweep(sweep_config(c));
    if (!out.empty()) emit_report(rep, out, c.name);
    if (c.assert_sweep) {
      sweep_assertions(r, rep, c.name, c.min_slope, c.slack);
    } else {
      bool ok = true;
      for (const auto& row : rep.rows) ok = ok && row.ok;
      r.expect(c.name + ": all rows completed", ok, std::to_string(rep.rows.size()) + " rows");
    }
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pulse-optics: nonlinear pulses in boundary problems"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::string config, out;
  std::vector<double> eps;
  auto add_common = [&](CLI::App* sub, bool with_eps) {
    sub->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
    if (with_eps) sub->add_option("--eps", eps, "override eps (repeatable)")->check(CLI::PositiveNumber);
  };
  CLI::App* check = app.add_subcommand("check", "structural checks of the system");
  CLI::App* profiles = app.add_subcommand("profiles", "solve the profile system");
  CLI::App* exact = app.add_subcommand("exact", "reference solve of the singular problem");
  CLI::App* sweep = app.add_subcommand("sweep", "convergence sweep over eps");
  add_common(check, false);
  add_common(profiles, false);
  add_common(exact, true);
  add_common(sweep, true);

  CLI11_PARSE(app, argc, argv);

  RunConfig c;
  try {
    c = load_run_config(config);
    if (!eps.empty()) c.eps = eps;
    if (*sweep) check_sweep_config(sweep_config(c));
  } catch (const Error& e) {
    std::fprintf(stderr, "pulse-optics: %s\n", e.what());
    return 2;
  }

  bool ok = true;
  auto report = [&](const CheckResult& r) {
    print(r);
    ok = ok && r.passed();
  };
  if (*check) report(run_check(c));
  if (*profiles) report(run_profiles(c, out));
  if (*exact)
    for (double e : c.eps) report(run_exact(c, e, out));
  if (*sweep) report(run_sweep_cmd(c, out));
  return ok ? 0 : 1;
}
