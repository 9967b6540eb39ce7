#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "hyperbolic_model.hpp"
#include "oscillatory_calculus.hpp"
#include "profile_solver.hpp"
#include "singular_solver.hpp"
#include "sweep_harness.hpp"
#include "theta_signal.hpp"

namespace pulse_optics {

struct Assertion {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Outcome of one acceptance criterion: named assertions plus a runtime budget.
struct CheckResult {
  int id = 0;
  std::string title;
  double seconds = 0.0;
  double budget = 0.0;
  std::vector<Assertion> asserts;
  std::string error;

  void expect(const std::string& name, bool ok, const std::string& detail = "") {
    asserts.push_back({name, ok, detail});
  }
  bool within_budget() const { return budget <= 0 || seconds < budget; }
  bool passed() const {
    if (!error.empty() || !within_budget() || asserts.empty()) return false;
    for (const auto& a : asserts)
      if (!a.pass) return false;
    return true;
  }
};

namespace detail {

inline std::string fmt(double v, int prec = 4) {
  std::ostringstream o;
  o.precision(prec);
  o << v;
  return o.str();
}

inline CheckResult timed(int id, const std::string& title, double budget, const std::function<void(CheckResult&)>& body) {
  CheckResult r;
  r.id = id;
  r.title = title;
  r.budget = budget;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const Error& e) {
    r.error = e.what();
  } catch (const std::exception& e) {
    r.error = std::string("unexpected: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline double band(const std::vector<double>& v) {
  return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
}

inline BoundaryPulse ex1_pulse(double amp, double center = 5.0, double rise = 0.02) {
  BoundaryPulse g;
  g.amplitude = Vec::Constant(2, amp);
  g.center = center;
  g.rise = rise;
  return g;
}

inline SignalHandle gaussian_handle(double Theta, int n, double c = 0.0, double a = 1.0) {
  return make_handle(ThetaSignal::from_function(Theta, n, [=](double t) { return a * std::exp(-(t - c) * (t - c)); }));
}

inline SignalHandle dgaussian_handle(double Theta, int n, double c = 0.0, double a = 1.0) {
  return make_handle(ThetaSignal::from_function(
      Theta, n, [=](double t) { return -2 * a * (t - c) * std::exp(-(t - c) * (t - c)); }));
}

}  // namespace detail

/// Structural facts of a system at boundary frequency beta.
inline void structural_assertions(CheckResult& r, const SystemSpec& s, const Vec& beta,
                                  const std::optional<std::vector<double>>& roots,
                                  const std::optional<std::vector<int>>& incoming, const std::optional<int>& p,
                                  double tol, int density) {
  const ValidationReport v = validate_system(s);
  std::string failed;
  for (const auto& it : v.items)
    if (!it.pass) failed += it.name + " ";
  r.expect("validate_system", v.pass(), failed.empty() ? "all items pass" : "failed: " + failed);
  const PhaseTable t = phase_table(s, beta);
  if (roots) {
    bool ok = static_cast<int>(roots->size()) == t.M();
    double err = 0.0;
    for (int m = 0; ok && m < t.M(); ++m) err = std::max(err, std::abs(t.modes[m].omega - (*roots)[m]));
    ok = ok && err <= tol;
    r.expect("roots", ok, "max |omega - expected| = " + detail::fmt(err));
  }
  if (incoming) {
    std::vector<int> got;
    for (int m : t.incoming_set) got.push_back(m + 1);
    std::string g;
    for (int m : got) g += std::to_string(m) + " ";
    r.expect("incoming set", got == *incoming, "{ " + g + "}");
  }
  int dim_in = 0;
  for (int m : t.incoming_set) dim_in += t.modes[m].nu;
  if (p) r.expect("p", s.p == *p && dim_in == *p, "p = " + std::to_string(s.p) + ", incoming dim = " + std::to_string(dim_in));
  Mat sum = Mat::Zero(s.N, s.N);
  for (const auto& P : t.projectors) sum += P;
  const double perr = (sum - Mat::Identity(s.N, s.N)).cwiseAbs().maxCoeff();
  r.expect("sum of projectors = I", perr <= 1e-12, "max entry error " + detail::fmt(perr));
  StabilityScanOptions so;
  so.density = density;
  const StabilityScanResult sc = uniform_stability_scan(s, so);
  r.expect("uniform stability", sc.uniformly_stable && sc.min_sigma >= 0.999,
           "min sigma = " + detail::fmt(sc.min_sigma, 12) + " over " + std::to_string(sc.evaluated) + " points");
}

inline CheckResult criterion_structural() {
  return detail::timed(1, "structural suite (EX1)", 1.0, [](CheckResult& r) {
    structural_assertions(r, ex1_system(), Vec::Constant(1, 1.0), std::vector<double>{-0.5, 1.0, -1.0},
                          std::vector<int>{1, 3}, 2, 1e-12, 64);
  });
}

inline CheckResult criterion_stable_dimension() {
  return detail::timed(2, "stable subspace dimension", 5.0, [](CheckResult& r) {
    const SystemSpec s = ex1_system();
    std::mt19937 gen(2024);
    std::uniform_real_distribution<double> ut(-10.0, 10.0), ug(0.0, 10.0);
    int good = 0;
    for (int i = 0; i < 100; ++i) {
      FrequencyPoint z;
      z.tau = ut(gen);
      z.gamma = 10.0 - ug(gen);
      z.eta = Vec::Zero(s.d - 1);
      good += stable_subspace(s, z).cols() == s.p;
    }
    r.expect("dim = p at 100 random points", good == 100, std::to_string(good) + "/100");
  });
}

namespace detail {

inline PhaseSet ex1_phase_set() { return {{-0.5, 1.0, -1.0}, {0, 1, 2}}; }

/// Resonant, single, own-phase product, transversal and same-foreign-phase terms.
inline TypeFFunction mixed_type_f(double Theta, int n) {
  TypeFFunction F{ex1_phase_set(), {}};
  F.add_single(0, gaussian_handle(Theta, n), 0, 1.0);
  F.add_single(0, dgaussian_handle(Theta, n, 1.0), 1, 0.7);
  F.add_product(1, gaussian_handle(Theta, n), 1, gaussian_handle(Theta, n, 0.5), 1, -0.3);
  F.add_product(1, gaussian_handle(Theta, n), 1, dgaussian_handle(Theta, n), 2, 0.4);
  F.add_product(2, dgaussian_handle(Theta, n, -1.0), 0, gaussian_handle(Theta, n), 1, 1.3);
  F.add_product(2, gaussian_handle(Theta, n), 0, dgaussian_handle(Theta, n, 0.3), 0, 0.5);
  return F;
}

}  // namespace detail

inline CheckResult criterion_calculus() {
  return detail::timed(3, "calculus identities", 30.0, [](CheckResult& r) {
    const double Theta = 16.0;
    const int n = 512;  // dtheta = 2^-9 * 2 Theta
    const TypeFFunction F = detail::mixed_type_f(Theta, n);
    const TypeFFunction E1 = apply_E(F);
    r.expect("E idempotent", E1.terms == apply_E(E1).terms && apply_E(complement_E(F)).terms.empty(),
             std::to_string(E1.terms.size()) + " resonant terms");

    // Slow axis: 16 points of the coupled EX1 corrector source, each with a transversal product added.
    const SystemSpec sys = ex1_coupled_system();
    const PhaseTable tab = phase_table(sys, Vec::Constant(1, 1.0));
    const InteractionCoeffs coef = interaction_coefficients(sys, tab);
    GridSpec g;
    g.T = 0.5;
    g.X = 0.5;
    g.Theta = Theta;
    g.nt = 9;
    g.nx = 9;
    g.ntheta = n;
    ProfileOptions po;
    po.scheme = ThetaScheme::Upwind3;
    const ProfileSet P = solve_profiles(sys, tab, coef, detail::ex1_pulse(0.2, 0.0), g, po);
    ProfileSet Pn = P;
    Pn.sigma = P.previous;
    std::vector<double> th, xi;
    for (int k = 0; k < 16; ++k) {
      th.push_back(-6.0 + 0.8 * k);
      xi.push_back(-2.0 + 0.3 * k);
    }
    double worst = 0.0, e_r = 0.0;
    bool e_r_zero = true;
    int quad_pieces = 0;
    for (int k = 0; k < 16; ++k) {
      const double t = 0.1 + 0.025 * k, x = 0.02 * k;
      TypeFFunction Fk = corrector_source(Pn, P, coef, tab, 0.4, t, x);
      Fk.add_product(2, detail::dgaussian_handle(Theta, n, -1.0), 0, detail::gaussian_handle(Theta, n), 1,
                     0.5 + 0.05 * k);
      CorrectorRep U = apply_R_infinity(Fk);
      U.quad_tol = 1e-9;
      quad_pieces += static_cast<int>(U.quad.size());
      e_r_zero = e_r_zero && apply_E(U.closed_as_type_f()).terms.empty();
      for (int j = 0; j < 3; ++j) e_r = std::max(e_r, std::abs(apply_E(U.closed_as_type_f()).component(j, 0.3, 0.1)));
      worst = std::max(worst, fast_operator_residual(U, Fk, th, xi));
    }
    r.expect("E R_infinity pieces = 0", e_r_zero, "no resonant terms in any closed piece");
    r.expect("fast-operator identity on 16^3 grid", worst < 1e-4 && quad_pieces >= 16,
             "sup residual " + detail::fmt(worst) + ", quadrature pieces " + std::to_string(quad_pieces));
  });
}

inline CheckResult criterion_moment_zero() {
  return detail::timed(4, "moment-zero scaling", 10.0, [](CheckResult& r) {
    const std::vector<double> ps = {1e-1, 3e-2, 1e-2, 3e-3};
    const double Theta = 8192.0;
    const int n = 65536;
    const auto g = ThetaSignal::from_function(Theta, n, [](double t) { return std::exp(-t * t); });
    std::vector<double> err, integ;
    for (double p : ps) {
      const auto gp = moment_zero(g, p);
      integ.push_back(std::abs(gp.integral()));
      err.push_back((g - gp).hs_norm(1.0) / std::sqrt(p));
    }
    const double imax = *std::max_element(integ.begin(), integ.end());
    r.expect("integral of sigma_p = 0", imax <= 1e-14, "max |integral| " + detail::fmt(imax));
    r.expect("H-norm error / sqrt(p) band < 3", detail::band(err) < 3.0, "band " + detail::fmt(detail::band(err)));

    std::vector<double> prim;
    for (double p : ps) {
      const auto gd = ThetaSignal::from_function(64.0 / p, 4096, [p](double t) { return std::exp(-(p * t) * (p * t)); });
      const auto gp = moment_zero(gd, p);
      prim.push_back(decaying_primitive(gp).hs_norm(1.0) * p / gp.hs_norm(1.0));
    }
    r.expect("|sigma*_p| p / |sigma_p| band < 3", detail::band(prim) < 3.0, "band " + detail::fmt(detail::band(prim)));

    const auto tau = ThetaSignal::from_function(Theta, n, [](double t) { return std::exp(-(t - 0.5) * (t - 0.5)); });
    const auto dtau = theta_derivative(tau);
    const auto raw = product(g, dtau);
    std::vector<double> nt;
    for (double p : ps)
      nt.push_back((raw - nontransversal_product(g, dtau, p)).hs_norm(1.0) / (g.hs_norm(1.0) * tau.hs_norm(1.0) * std::sqrt(p)));
    r.expect("nontransversal error / sqrt(p) band < 3", detail::band(nt) < 3.0, "band " + detail::fmt(detail::band(nt)));
  });
}

inline CheckResult criterion_transversal() {
  return detail::timed(5, "transversal integral oracle", 1.0, [](CheckResult& r) {
    const auto g = detail::gaussian_handle(16.0, 4096);
    const double v = transversal_integral(*g, *g, 0.0, 1.0, -1.0, 0.0, 0.0, 1e-9);
    const double ref = -std::sqrt(M_PI / 8);
    r.expect("equals -sqrt(pi/8)", std::abs(v - ref) <= 1e-6, detail::fmt(v, 10) + " vs " + detail::fmt(ref, 10));
  });
}

/// Picard contraction, outgoing profiles, fixed-point residual and causality of a profile solve.
inline void profile_assertions(CheckResult& r, const ProfileSet& P, const PhaseTable& tab, const ProfileOptions& opt,
                               double onset) {
  bool tail = P.ratios.size() >= 3;
  for (size_t i = 1; i < P.ratios.size(); ++i) tail = tail && P.ratios[i] < 1.0;
  // geometric tail: the last ratios stay below 1 and the differences keep shrinking
  for (size_t i = std::max<size_t>(1, P.diffs.size() - 3); i < P.diffs.size(); ++i)
    tail = tail && P.diffs[i] < P.diffs[i - 1];
  double rmax = 0.0;
  for (size_t i = 1; i < P.ratios.size(); ++i) rmax = std::max(rmax, P.ratios[i]);
  r.expect("contraction with geometric tail", tail && P.diffs.back() < opt.tol,
           std::to_string(P.iterations) + " iterations, max ratio " + detail::fmt(rmax) + ", last diff " +
               detail::fmt(P.diffs.back()));
  double out = 0.0;
  for (int m : tab.outgoing_set)
    for (int k = 0; k < tab.modes[m].nu; ++k) {
      const int c = tab.column(m, k);
      for (double v : P.sigma[static_cast<size_t>(c)]) out = std::max(out, std::abs(v));
    }
  r.expect("outgoing profiles vanish", out < 1e-12, "sup " + detail::fmt(out));
  const GridSpec& g = P.grid;
  const double bound = std::max(10 * opt.tol, P.residual_C * (g.dx() + g.dtheta()));
  r.expect("fixed-point residual", P.residual_sup <= bound && P.residual_C < 1.0,
           "residual " + detail::fmt(P.residual_sup) + ", C = " + detail::fmt(P.residual_C));
  if (onset > 0) {
    double before = 0.0;
    for (int c = 0; c < P.N(); ++c) {
      if (!P.active(c)) continue;
      for (int is = 0; is < g.nt && is * g.ds() <= onset; ++is)
        for (int ix = 0; ix < g.nx; ++ix)
          for (int q = 0; q < g.ntheta; ++q) before = std::max(before, std::abs(P.sigma[c][g.index(is, ix, q)]));
    }
    r.expect("causality exact", before == 0.0, "sup before onset " + detail::fmt(before));
  }
}

inline CheckResult criterion_profiles() {
  return detail::timed(6, "profile solver 256x256x512", 120.0, [](CheckResult& r) {
    const SystemSpec s = ex1_system();
    const PhaseTable tab = phase_table(s, Vec::Constant(1, 1.0));
    const InteractionCoeffs coef = interaction_coefficients(s, tab);
    GridSpec g;
    g.T = 1.0;
    g.X = 2.0;
    g.Theta = 16.0;
    g.nt = 256;
    g.nx = 256;
    g.ntheta = 512;
    BoundaryPulse G = detail::ex1_pulse(0.2);
    G.onset = 0.1;
    ProfileOptions opt;
    const ProfileSet P = solve_profiles(s, tab, coef, G, g, opt);
    profile_assertions(r, P, tab, opt, G.onset);
  });
}

inline CheckResult criterion_exact() {
  return detail::timed(7, "exact solver validation", 300.0, [](CheckResult& r) {
    const double eps = 1.0 / 40;
    const SystemSpec lin = ex1_system(false);
    const SystemSpec nl = ex1_coupled_system();
    const BoundaryPulse G = detail::ex1_pulse(0.2, 5.0, 0.1);

    const FineGrid gz = fine_grid(nl, eps, 0.3, 0.7, 12, 0.8, 4);
    double zmax = 0.0;
    for (const auto& U : solve_exact(nl, detail::ex1_pulse(0.0), eps, gz).u) zmax = std::max(zmax, U.cwiseAbs().maxCoeff());
    r.expect("zero data gives zero", zmax == 0.0, "sup " + detail::fmt(zmax));

    const FineGrid g1 = fine_grid(lin, eps, 0.5, 1.1, 12, 0.8, 4);
    auto oracle_err = [&](const FineGrid& g) {
      const FineSolution num = solve_exact(lin, G, eps, g);
      return sup_difference(num, sample_solution(g, eps, lin.N, [&](double t, double x) {
                              return linear_oracle(lin, G, eps, t, x, g.beta0);
                            }));
    };
    const double e1 = oracle_err(g1), e2 = oracle_err(refined(g1));
    const double oo = std::log2(e1 / e2);
    r.expect("linear oracle O(dx^2)", oo >= 1.7, "errors " + detail::fmt(e1) + ", " + detail::fmt(e2) + ", order " + detail::fmt(oo, 3));

    const FineSolution a = solve_exact(nl, G, eps, g1);
    const FineSolution b = solve_exact(nl, G, eps, refined(g1));
    const FineSolution c = solve_exact(nl, G, eps, refined(refined(g1)));
    const double d12 = sup_difference_coarse(a, b), d23 = sup_difference_coarse(b, c);
    const double so = std::log2(d12 / d23);
    r.expect("self-convergence order >= 1.7", so >= 1.7, "order " + detail::fmt(so, 3));

    SystemSpec nb = nl;
    nb.dB.assign(3, Mat::Zero(2, 3));
    nb.dB[0](0, 2) = 0.5;
    nb.dB[2](1, 0) = -0.3;
    const FineSolution sb = solve_exact(nb, G, eps, g1);
    const double bc = residual_norms(sb, nb, G).bc_residual_sup;
    r.expect("boundary residual <= 1e-10", bc <= 1e-10,
             "residual " + detail::fmt(bc) + ", Newton iterations <= " + std::to_string(sb.newton_max_iterations));

    auto max_ratio = [&](double e) {
      const FineGrid g = fine_grid(nl, e, 1.0, 2.1, 12, 0.8, 4);
      const FineSolution pic = picard_solve_singular(nl, G, e, g, 1e-10);
      double m = 0.0;
      for (double x : pic.ratios) m = std::max(m, x);
      return m;
    };
    const double r10 = max_ratio(0.1), r40 = max_ratio(eps);
    const double spread = std::max(r10, r40) / std::min(r10, r40);
    r.expect("Picard ratios eps-uniform within 2x", spread < 2.0 && std::max(r10, r40) < 1.0,
             "max ratio " + detail::fmt(r10) + " (1/10), " + detail::fmt(r40) + " (1/40)");
  });
}

/// The sweep preset: profile grid 256 x 128 x 512 (Theta 16), fine grid 24 points per wavelength.
inline SweepConfig default_sweep_config(const SystemSpec& s, const std::string& name) {
  SweepConfig c;
  c.name = name;
  c.system = s;
  c.pulse = detail::ex1_pulse(0.2);
  c.profile_grid.T = 1.0;
  c.profile_grid.X = 2.05;
  c.profile_grid.Theta = 16.0;
  c.profile_grid.nt = 256;
  c.profile_grid.nx = 128;
  c.profile_grid.ntheta = 512;
  c.profile.scheme = ThetaScheme::Upwind3;
  c.window.x_hi = 2.0;
  return c;
}

inline void sweep_assertions(CheckResult& r, const SweepReport& rep, const std::string& tag, double min_slope = 0.05,
                             double slack = 0.1) {
  const SweepVerdict v = assess_sweep(rep, min_slope, slack);
  std::string errs, fails;
  for (const auto& row : rep.rows) {
    errs += detail::fmt(row.err_leading_sup, 3) + " ";
    if (!row.ok) fails += row.failure + "; ";
  }
  r.expect(tag + ": all rows completed", v.all_rows_ok, fails.empty() ? "ok" : fails);
  r.expect(tag + ": err_leading decreasing", v.decreasing, errs);
  r.expect(tag + ": fitted slope > " + detail::fmt(min_slope), v.slope_ok,
           rep.fit_leading.ok ? "slope " + detail::fmt(rep.fit_leading.slope, 3) + " +- " + detail::fmt(rep.fit_leading.stderr_, 2)
                              : rep.fit_leading.reason);
  if (!rep.rows.empty())
    r.expect(tag + ": corrected <= leading at smallest eps", v.corrector_helps,
             detail::fmt(rep.rows.back().err_corrected_sup, 4) + " vs " + detail::fmt(rep.rows.back().err_leading_sup, 4));
}

inline CheckResult criterion_sweep(std::vector<SweepReport>* reports = nullptr) {
  return detail::timed(8, "convergence sweep", 1800.0, [&](CheckResult& r) {
    for (const auto& [sys, name] : {std::pair{ex1_system(true), std::string("ex1_nonlinear")},
                                    std::pair{ex1_coupled_system(), std::string("ex1_coupled")}}) {
      const SweepReport rep = run_sweep(default_sweep_config(sys, name));
      sweep_assertions(r, rep, name);
      if (reports) reports->push_back(rep);
    }
  });
}

inline CheckResult criterion_basis() {
  return detail::timed(9, "basis independence", 10.0, [](CheckResult& r) {
    const SystemSpec s = ex1_system();
    const PhaseTable t = phase_table(s, Vec::Constant(1, 1.0));
    const PhaseTable t2 = rescale_basis(t, 2.0);
    GridSpec g;
    g.T = 0.5;
    g.X = 1.0;
    g.Theta = 16.0;
    g.nt = 33;
    g.nx = 65;
    g.ntheta = 512;
    const BoundaryPulse G = detail::ex1_pulse(0.2);
    const ProfileSet p = solve_profiles(s, t, interaction_coefficients(s, t), G, g);
    const ProfileSet p2 = solve_profiles(s, t2, interaction_coefficients(s, t2), G, g);
    const double eps = 1.0 / 40;
    double diff = 0.0, mag = 0.0;
    for (int i = 0; i <= 100; ++i)
      for (int j = 0; j <= 100; ++j) {
        const double tt = 0.5 * i / 100, x = 0.9 * j / 100;
        const Vec a = leading_order_eval(p, t, eps, tt, x);
        diff = std::max(diff, (a - leading_order_eval(p2, t2, eps, tt, x)).cwiseAbs().maxCoeff());
        mag = std::max(mag, a.cwiseAbs().maxCoeff());
      }
    r.expect("u^a unchanged under r -> 2r, l -> l/2", diff < 1e-10 && mag > 0.05,
             "sup change " + detail::fmt(diff) + " (sup |u^a| = " + detail::fmt(mag) + ")");
  });
}

}  // namespace pulse_optics
