#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "hyperbolic_model.hpp"
#include "oscillatory_calculus.hpp"
#include "profile_solver.hpp"
#include "singular_solver.hpp"
#include "system.hpp"

namespace pulse_optics {

inline constexpr const char* kVersion = "1.0.0";

/// M1 = smallest integer >= d/2 + 3.
inline int m1_for(int d) { return static_cast<int>(std::ceil(d / 2.0 + 3.0)); }

/// Default exponent of the cutoff rule p = eps^b.
inline double default_b(int d) { return 2.0 / (2.0 * m1_for(d) + 5.0); }

/// Comparison window in (t, x_d); bounds are inclusive and must lie inside both solvers' domains.
struct SweepWindow {
  double t_lo = 0.0, t_hi = 1.0;
  double x_lo = 0.0, x_hi = 2.0;
};

struct SweepConfig {
  std::string name = "sweep";
  SystemSpec system;
  BoundaryPulse pulse;
  Vec beta = Vec::Constant(1, 1.0);
  std::vector<double> eps = {1.0 / 10, 1.0 / 20, 1.0 / 40, 1.0 / 80};
  double b = -1.0;  // < 0: default_b(d)
  GridSpec profile_grid;
  ProfileOptions profile;
  int corrector_stride = 4;
  double quad_tol = 1e-9;
  bool corrector = true;
  double T = 1.0;
  double X = 2.05;
  int ppw = 24;
  double cfl = 0.8;
  int n_snap = 8;
  SweepWindow window;
  double floor = 1e-6;
  ExactOptions exact;

  double exponent() const { return b > 0 ? b : default_b(system.d); }
  double p_of(double e) const { return std::pow(e, exponent()); }
};

struct SweepRow {
  double eps = 0.0;
  double p = 0.0;
  double err_leading_sup = NAN;
  double err_corrected_sup = NAN;
  double err_L2 = NAN;
  bool floor = false;
  bool ok = false;
  std::string failure;
  double runtime_exact = 0.0;
  double runtime_corrector = 0.0;
  double runtime_total = 0.0;
  int newton_max_iterations = 0;
  double max_eps_u = 0.0;
};

struct RateFit {
  bool ok = false;
  double slope = NAN;
  double stderr_ = NAN;
  int used = 0;
  std::string reason;
};

struct SweepReport {
  std::string name;
  std::vector<SweepRow> rows;
  RateFit fit_leading;
  RateFit fit_corrected;
  std::string config_hash;
  double b = 0.0;
  double runtime_profiles = 0.0;
  int profile_iterations = 0;
  double profile_ratio_max = 0.0;
};

/// Least-squares slope of log err against log eps over rows above the floor.
inline RateFit fit_rate(const std::vector<double>& eps, const std::vector<double>& err, double floor = 1e-6) {
  if (eps.size() != err.size()) throw Error(ErrorKind::DimensionMismatch, "fit_rate: eps and err differ in length");
  std::vector<double> x, y;
  for (size_t i = 0; i < eps.size(); ++i)
    if (std::isfinite(err[i]) && err[i] > floor && eps[i] > 0) {
      x.push_back(std::log(eps[i]));
      y.push_back(std::log(err[i]));
    }
  const int n = static_cast<int>(x.size());
  if (n < 3) throw Error(ErrorKind::InsufficientData, "fewer than 3 rows above the numerical floor");
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0) throw Error(ErrorKind::InsufficientData, "eps values are not distinct");
  RateFit f;
  f.ok = true;
  f.used = n;
  f.slope = sxy / sxx;
  double rss = 0;
  for (int i = 0; i < n; ++i) {
    const double r = y[i] - my - f.slope * (x[i] - mx);
    rss += r * r;
  }
  f.stderr_ = n > 2 ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
  return f;
}

namespace detail {

inline RateFit try_fit(const std::vector<SweepRow>& rows, bool corrected, double floor) {
  std::vector<double> e, r;
  for (const auto& row : rows)
    if (row.ok) {
      e.push_back(row.eps);
      r.push_back(corrected ? row.err_corrected_sup : row.err_leading_sup);
    }
  try {
    return fit_rate(e, r, floor);
  } catch (const Error& err) {
    RateFit f;
    f.reason = err.what();
    return f;
  }
}

inline uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << v;
  return o.str();
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

inline json sweep_config_to_json(const SweepConfig& c) {
  json j;
  j["name"] = c.name;
  j["system"] = system_to_json(c.system);
  json p;
  p["amplitude"] = std::vector<double>(c.pulse.amplitude.data(), c.pulse.amplitude.data() + c.pulse.amplitude.size());
  p["rise"] = c.pulse.rise;
  p["onset"] = c.pulse.onset;
  p["center"] = c.pulse.center;
  p["width"] = c.pulse.width;
  j["pulse"] = p;
  j["beta"] = std::vector<double>(c.beta.data(), c.beta.data() + c.beta.size());
  j["eps"] = c.eps;
  j["b"] = c.exponent();
  j["profile_grid"] = grid_to_json(c.profile_grid);
  j["profile_scheme"] = c.profile.scheme == ThetaScheme::Upwind3 ? "upwind3" : "upwind1";
  j["profile_tol"] = c.profile.tol;
  j["corrector"] = c.corrector;
  j["corrector_stride"] = c.corrector_stride;
  j["quad_tol"] = c.quad_tol;
  j["fine"] = {{"T", c.T}, {"X", c.X}, {"ppw", c.ppw}, {"cfl", c.cfl}, {"n_snap", c.n_snap}};
  j["window"] = {{"t_lo", c.window.t_lo}, {"t_hi", c.window.t_hi}, {"x_lo", c.window.x_lo}, {"x_hi", c.window.x_hi}};
  j["floor"] = c.floor;
  return j;
}

inline std::string config_hash(const SweepConfig& c) { return detail::hex64(detail::fnv1a(sweep_config_to_json(c).dump())); }

/// Error norms of one exact solution against u^a and u^a + eps U^1 over the window.
struct WindowErrors {
  double leading_sup = 0.0;
  double corrected_sup = 0.0;
  double leading_l2 = 0.0;
};

inline WindowErrors window_errors(const FineSolution& sol, const ProfileSet& P, const PhaseTable& tab,
                                  const CorrectorField* U1, const SweepWindow& w) {
  const FineGrid& g = sol.grid;
  const double eps = sol.eps;
  std::vector<int> snaps;
  for (size_t k = 0; k < sol.times.size(); ++k)
    if (sol.times[k] >= w.t_lo - 1e-12 && sol.times[k] <= w.t_hi + 1e-12) snaps.push_back(static_cast<int>(k));
  const int j0 = static_cast<int>(std::ceil(w.x_lo / g.dx() - 1e-9));
  const int j1 = std::min(g.nx - 1, static_cast<int>(std::floor(w.x_hi / g.dx() + 1e-9)));
  if (snaps.empty() || j1 < j0) throw Error(ErrorKind::Configuration, "comparison window contains no fine nodes");
  const int nj = j1 - j0 + 1;
  const int ns = static_cast<int>(snaps.size());
  std::vector<double> lead(static_cast<size_t>(ns) * nj), corr(lead.size()), sq(lead.size());
  parallel_for(ns * nj, [&](int idx) {
    const int k = snaps[static_cast<size_t>(idx / nj)];
    const int j = j0 + idx % nj;
    const double t = sol.times[static_cast<size_t>(k)], x = g.x(j);
    const Vec ua = leading_order_eval(P, tab, eps, t, x);
    const Vec d = sol.u[static_cast<size_t>(k)].col(j) - ua;
    lead[static_cast<size_t>(idx)] = d.cwiseAbs().maxCoeff();
    sq[static_cast<size_t>(idx)] = d.squaredNorm();
    corr[static_cast<size_t>(idx)] = U1 ? (d - eps * U1->evaluate(tab, eps, t, x)).cwiseAbs().maxCoeff() : lead[idx];
  });
  WindowErrors e;
  double s2 = 0.0;
  for (size_t i = 0; i < lead.size(); ++i) {
    e.leading_sup = std::max(e.leading_sup, lead[i]);
    e.corrected_sup = std::max(e.corrected_sup, corr[i]);
    s2 += sq[i];
  }
  const double dt = ns > 1 ? sol.times[static_cast<size_t>(snaps[1])] - sol.times[static_cast<size_t>(snaps[0])] : 1.0;
  e.leading_l2 = std::sqrt(s2 * g.dx() * dt);
  return e;
}

inline void check_sweep_config(const SweepConfig& c) {
  if (c.eps.empty()) throw Error(ErrorKind::Configuration, "sweep needs at least one eps");
  for (size_t i = 0; i < c.eps.size(); ++i) {
    if (!(c.eps[i] > 0 && c.eps[i] < 1)) throw Error(ErrorKind::Configuration, "eps values must lie in (0,1)");
    if (i && !(c.eps[i] < c.eps[i - 1])) throw Error(ErrorKind::Configuration, "eps list must be strictly decreasing");
  }
  const SweepWindow& w = c.window;
  if (!(w.t_lo < w.t_hi && w.x_lo < w.x_hi)) throw Error(ErrorKind::Configuration, "empty comparison window");
  if (w.t_lo < 0 || w.x_lo < 0 || w.t_hi > std::min(c.T, c.profile_grid.T) + 1e-12 ||
      w.x_hi > std::min(c.X, c.profile_grid.X) + 1e-12)
    throw Error(ErrorKind::Configuration, "comparison window must lie inside both solver domains");
}

/// Profiles once, then per eps: exact solve, corrector at p = eps^b, and window norms.
/// A failing row records its reason; the remaining rows still run.
inline SweepReport run_sweep(const SweepConfig& c) {
  check_sweep_config(c);
  const auto t_start = std::chrono::steady_clock::now();
  const ValidationReport vr = validate_system(c.system);
  if (!vr.pass()) throw Error(ErrorKind::Precondition, "system fails validation");
  const StabilityScanResult sc = uniform_stability_scan(c.system);
  if (!sc.uniformly_stable) throw Error(ErrorKind::Precondition, "system fails the uniform stability scan");
  const PhaseTable tab = phase_table(c.system, c.beta);
  const InteractionCoeffs coef = interaction_coefficients(c.system, tab);
  const ProfileSet P = solve_profiles(c.system, tab, coef, c.pulse, c.profile_grid, c.profile);

  SweepReport rep;
  rep.name = c.name;
  rep.b = c.exponent();
  rep.config_hash = config_hash(c);
  rep.runtime_profiles = detail::seconds_since(t_start);
  rep.profile_iterations = P.iterations;
  for (double r : P.ratios) rep.profile_ratio_max = std::max(rep.profile_ratio_max, r);

  for (double eps : c.eps) {
    SweepRow row;
    row.eps = eps;
    row.p = c.p_of(eps);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const FineGrid g = fine_grid(c.system, eps, c.T, c.X, c.ppw, c.cfl, c.n_snap, c.beta(0));
      const FineSolution sol = solve_exact(c.system, c.pulse, eps, g, c.exact);
      row.runtime_exact = detail::seconds_since(t0);
      row.newton_max_iterations = sol.newton_max_iterations;
      row.max_eps_u = sol.max_eps_u;
      CorrectorField U1;
      const auto t1 = std::chrono::steady_clock::now();
      if (c.corrector) {
        CorrectorOptions co;
        co.p = row.p;
        co.stride_t = co.stride_x = c.corrector_stride;
        co.quad_tol = c.quad_tol;
        U1 = build_corrector(P, coef, tab, co);
      }
      const WindowErrors e = window_errors(sol, P, tab, c.corrector ? &U1 : nullptr, c.window);
      row.runtime_corrector = detail::seconds_since(t1);
      row.err_leading_sup = e.leading_sup;
      row.err_corrected_sup = e.corrected_sup;
      row.err_L2 = e.leading_l2;
      row.floor = e.leading_sup <= c.floor;
      row.ok = true;
    } catch (const Error& err) {
      row.failure = err.what();
    }
    row.runtime_total = detail::seconds_since(t0);
    rep.rows.push_back(row);
  }
  rep.fit_leading = detail::try_fit(rep.rows, false, c.floor);
  rep.fit_corrected = detail::try_fit(rep.rows, true, c.floor);
  return rep;
}

struct SweepVerdict {
  bool decreasing = false;
  bool slope_ok = false;
  bool corrector_helps = false;
  bool all_rows_ok = false;
  bool passed() const { return decreasing && slope_ok && corrector_helps && all_rows_ok; }
};

/// err_leading(eps_{i+1}) <= (1 + slack) err_leading(eps_i), slope above min_slope, and the corrected
/// error not above the leading one at the smallest eps.
inline SweepVerdict assess_sweep(const SweepReport& r, double min_slope = 0.05, double slack = 0.1) {
  SweepVerdict v;
  v.all_rows_ok = !r.rows.empty();
  for (const auto& row : r.rows) v.all_rows_ok = v.all_rows_ok && row.ok;
  if (!v.all_rows_ok) return v;
  v.decreasing = true;
  for (size_t i = 1; i < r.rows.size(); ++i)
    v.decreasing = v.decreasing && r.rows[i].err_leading_sup <= (1 + slack) * r.rows[i - 1].err_leading_sup;
  v.slope_ok = r.fit_leading.ok && r.fit_leading.slope > min_slope;
  v.corrector_helps = r.rows.back().err_corrected_sup <= r.rows.back().err_leading_sup;
  return v;
}

namespace detail {

inline std::string num(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream o;
  o << std::setprecision(10) << v;
  return o.str();
}

inline json fit_json(const RateFit& f) {
  json j;
  j["ok"] = f.ok;
  j["slope"] = f.ok ? json(f.slope) : json(nullptr);
  j["stderr"] = f.ok ? json(f.stderr_) : json(nullptr);
  j["rows_used"] = f.used;
  if (!f.ok) j["reason"] = f.reason;
  return j;
}

/// Log-log plot of the two error columns against eps.
inline std::string sweep_svg(const SweepReport& r) {
  const double W = 480, H = 360, m = 50;
  std::vector<double> xs, ys;
  for (const auto& row : r.rows)
    if (row.ok) {
      xs.push_back(std::log10(row.eps));
      for (double v : {row.err_leading_sup, row.err_corrected_sup})
        if (v > 0) ys.push_back(std::log10(v));
    }
  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << r.name
    << ": sup error vs eps (log-log)</text>\n";
  if (!xs.empty() && !ys.empty()) {
    double x0 = *std::min_element(xs.begin(), xs.end()), x1 = *std::max_element(xs.begin(), xs.end());
    double y0 = *std::min_element(ys.begin(), ys.end()), y1 = *std::max_element(ys.begin(), ys.end());
    if (x1 - x0 < 1e-9) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-9) y0 -= 0.5, y1 += 0.5;
    auto X = [&](double v) { return m + (v - x0) / (x1 - x0) * (W - 2 * m); };
    auto Y = [&](double v) { return H - m - (v - y0) / (y1 - y0) * (H - 2 * m); };
    o << "<line x1=\"" << m << "\" y1=\"" << H - m << "\" x2=\"" << W - m << "\" y2=\"" << H - m
      << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << H - m << "\" stroke=\"black\"/>\n";
    const char* colors[2] = {"#1f77b4", "#d62728"};
    for (int col = 0; col < 2; ++col) {
      std::ostringstream pts;
      for (const auto& row : r.rows) {
        const double v = col ? row.err_corrected_sup : row.err_leading_sup;
        if (!row.ok || !(v > 0)) continue;
        const double px = X(std::log10(row.eps)), py = Y(std::log10(v));
        pts << px << ',' << py << ' ';
        o << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"3\" fill=\"" << colors[col] << "\"/>\n";
      }
      o << "<polyline fill=\"none\" stroke=\"" << colors[col] << "\" points=\"" << pts.str() << "\"/>\n";
    }
    o << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">log10 eps</text>\n";
    o << "<text x=\"" << W - m << "\" y=\"" << m << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << colors[0]
      << "\">leading</text>\n";
    o << "<text x=\"" << W - m << "\" y=\"" << m + 16 << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << colors[1]
      << "\">corrected</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace detail

inline std::string sweep_csv(const SweepReport& r) {
  std::ostringstream o;
  o << "eps,p,err_leading_sup,err_corrected_sup,err_L2,floor,status\n";
  for (const auto& row : r.rows)
    o << detail::num(row.eps) << ',' << detail::num(row.p) << ',' << detail::num(row.err_leading_sup) << ','
      << detail::num(row.err_corrected_sup) << ',' << detail::num(row.err_L2) << ',' << (row.floor ? "floor" : "")
      << ',' << (row.ok ? "ok" : "failed") << '\n';
  return o.str();
}

inline json sweep_summary(const SweepReport& r) {
  json j;
  j["name"] = r.name;
  j["version"] = kVersion;
  j["config_hash"] = r.config_hash;
  j["timestamp"] = static_cast<int64_t>(std::time(nullptr));
  j["b"] = r.b;
  j["fit_leading"] = detail::fit_json(r.fit_leading);
  j["fit_corrected"] = detail::fit_json(r.fit_corrected);
  j["profile"] = {{"iterations", r.profile_iterations}, {"max_ratio", r.profile_ratio_max},
                  {"runtime_s", r.runtime_profiles}};
  json rows = json::array();
  for (const auto& row : r.rows) {
    json x;
    x["eps"] = row.eps;
    x["p"] = row.p;
    x["ok"] = row.ok;
    if (!row.ok) x["failure"] = row.failure;
    x["err_leading_sup"] = std::isfinite(row.err_leading_sup) ? json(row.err_leading_sup) : json(nullptr);
    x["err_corrected_sup"] = std::isfinite(row.err_corrected_sup) ? json(row.err_corrected_sup) : json(nullptr);
    x["err_L2"] = std::isfinite(row.err_L2) ? json(row.err_L2) : json(nullptr);
    x["newton_max_iterations"] = row.newton_max_iterations;
    x["max_eps_u"] = row.max_eps_u;
    x["runtime_exact_s"] = row.runtime_exact;
    x["runtime_corrector_s"] = row.runtime_corrector;
    x["runtime_total_s"] = row.runtime_total;
    rows.push_back(x);
  }
  j["rows"] = rows;
  return j;
}

/// Writes <stem>.csv, <stem>.json and optionally <stem>.svg into dir.
inline std::vector<std::string> emit_report(const SweepReport& r, const std::string& dir, const std::string& stem = "sweep",
                                            bool svg = true) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir + ": " + ec.message());
  std::vector<std::string> out;
  auto write = [&](const std::string& name, const std::string& body) {
    const std::string path = (std::filesystem::path(dir) / name).string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot open " + path);
    f << body;
    if (!f) throw Error(ErrorKind::Io, "write failed for " + path);
    out.push_back(path);
  };
  write(stem + ".csv", sweep_csv(r));
  write(stem + ".json", sweep_summary(r).dump(2) + "\n");
  if (svg) write(stem + ".svg", detail::sweep_svg(r));
  return out;
}

}  // namespace pulse_optics
