#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "error.hpp"
#include "hyperbolic_model.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "profile_solver.hpp"
#include "theta_signal.hpp"

namespace pulse_optics {

using SignalHandle = std::shared_ptr<const ThetaSignal>;

inline SignalHandle make_handle(ThetaSignal s) { return std::make_shared<const ThetaSignal>(std::move(s)); }

/// Interpolation order used whenever a fast-variable function is evaluated off the theta grid.
inline constexpr int kFastOrder = 5;

/// Single: weight * f(theta0 + omega_a xi). Product: weight * f(theta0 + omega_a xi) * g(theta0 + omega_b xi).
struct TypeFTerm {
  enum class Kind { Single, Product };
  int component = 0;
  Kind kind = Kind::Single;
  SignalHandle f;
  int phase_f = 0;
  SignalHandle g;
  int phase_g = 0;
  double weight = 1.0;

  bool operator==(const TypeFTerm& o) const {
    return component == o.component && kind == o.kind && f == o.f && phase_f == o.phase_f && g == o.g &&
           phase_g == o.phase_g && weight == o.weight;
  }

  bool resonant(int own_phase) const {
    return phase_f == own_phase && (kind == Kind::Single || phase_g == own_phase);
  }
};

/// Fast-variable phase data: omega per phase index and the phase of each component (column of R).
struct PhaseSet {
  std::vector<double> omega;
  std::vector<int> phase_of;

  int N() const { return static_cast<int>(phase_of.size()); }
  double omega_of(int component) const { return omega[static_cast<size_t>(phase_of[static_cast<size_t>(component)])]; }
};

inline PhaseSet phase_set(const PhaseTable& t) {
  PhaseSet ps;
  for (int m = 0; m < t.M(); ++m) {
    ps.omega.push_back(t.modes[m].omega);
    for (int k = 0; k < t.modes[m].nu; ++k) ps.phase_of.push_back(m);
  }
  return ps;
}

struct TypeFFunction {
  PhaseSet phases;
  std::vector<TypeFTerm> terms;

  void add_single(int i, SignalHandle f, int a, double w) {
    if (w != 0.0 && f) terms.push_back({i, TypeFTerm::Kind::Single, std::move(f), a, nullptr, 0, w});
  }
  void add_product(int i, SignalHandle f, int a, SignalHandle g, int b, double w) {
    if (w != 0.0 && f && g) terms.push_back({i, TypeFTerm::Kind::Product, std::move(f), a, std::move(g), b, w});
  }

  /// Component i (coefficient of r_i) at (theta0, xi).
  double component(int i, double th0, double xi) const {
    double v = 0.0;
    for (const auto& tm : terms) {
      if (tm.component != i) continue;
      double x = tm.weight * (*tm.f)(th0 + phases.omega[tm.phase_f] * xi, kFastOrder);
      if (tm.kind == TypeFTerm::Kind::Product) x *= (*tm.g)(th0 + phases.omega[tm.phase_g] * xi, kFastOrder);
      v += x;
    }
    return v;
  }
  Vec evaluate(double th0, double xi) const {
    Vec v(phases.N());
    for (int i = 0; i < phases.N(); ++i) v(i) = component(i, th0, xi);
    return v;
  }
};

/// Keeps the terms whose phases all match their component's phase.
inline TypeFFunction apply_E(const TypeFFunction& F) {
  TypeFFunction out{F.phases, {}};
  for (const auto& tm : F.terms)
    if (tm.resonant(F.phases.phase_of[static_cast<size_t>(tm.component)])) out.terms.push_back(tm);
  return out;
}

/// (I - E) F.
inline TypeFFunction complement_E(const TypeFFunction& F) {
  TypeFFunction out{F.phases, {}};
  for (const auto& tm : F.terms)
    if (!tm.resonant(F.phases.phase_of[static_cast<size_t>(tm.component)])) out.terms.push_back(tm);
  return out;
}

/// (1/T) int_0^T F_j(theta0 + omega_j (xi - s), s) ds by composite Simpson on n panels.
inline double average_along(const TypeFFunction& F, int j, double th0, double xi, double T, int n = 20000) {
  const double wj = F.phases.omega_of(j);
  const double h = T / n;
  double acc = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double s = k * h;
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += w * F.component(j, th0 + wj * (xi - s), s);
  }
  return acc * h / 3.0 / T;
}

namespace detail {

/// Smallest theta interval outside of which |f| <= rel * sup|f|, padded by two cells; empty when f == 0.
inline std::pair<double, double> support(const ThetaSignal& f, double rel = 1e-12) {
  const auto& v = f.samples();
  const double cut = rel * f.sup();
  if (f.sup() == 0.0) return {1.0, -1.0};
  int lo = 0, hi = f.size() - 1;
  while (lo < hi && std::abs(v[static_cast<size_t>(lo)]) <= cut) ++lo;
  while (hi > lo && std::abs(v[static_cast<size_t>(hi)]) <= cut) --hi;
  return {std::max(-f.Theta(), f.theta(lo) - 2 * f.dtheta()), std::min(f.Theta(), f.theta(hi) + 2 * f.dtheta())};
}

inline std::pair<double, double> ray_range(std::pair<double, double> sup, double z0, double a) {
  const double s1 = (sup.first - z0) / a, s2 = (sup.second - z0) / a;
  return {std::min(s1, s2), std::max(s1, s2)};
}

}  // namespace detail

/// int_inf^xi g(z0 + s(omega_l - omega_i)) h(z0 + s(omega_m - omega_i)) ds with z0 = theta0 + omega_i xi.
inline double transversal_integral(const ThetaSignal& g, const ThetaSignal& h, double wi, double wl, double wm,
                                   double th0, double xi, double tol = 1e-9) {
  if (wl == wi || wm == wi || wl == wm)
    throw Error(ErrorKind::Precondition, "transversal integral needs pairwise distinct phase speeds");
  const auto sg = detail::support(g), sh = detail::support(h);
  if (sg.first > sg.second || sh.first > sh.second) return 0.0;
  const double z0 = th0 + wi * xi, al = wl - wi, am = wm - wi;
  const auto rg = detail::ray_range(sg, z0, al), rh = detail::ray_range(sh, z0, am);
  const double a = std::max({xi, rg.first, rh.first}), b = std::min(rg.second, rh.second);
  if (!(a < b)) return 0.0;
  auto f = [&](double s) { return g(z0 + s * al, kFastOrder) * h(z0 + s * am, kFastOrder); };
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, tol, &err);
  return -v;
}

struct ClosedPiece {
  int component = 0;
  double factor = 1.0;
  SignalHandle primitive;  // evaluated at theta0 + omega_a xi
  int phase_a = 0;
  SignalHandle plain;      // optional factor at theta0 + omega_b xi
  int phase_b = 0;
};

struct QuadPiece {
  int component = 0;
  double factor = 1.0;
  SignalHandle g;
  int phase_g = 0;
  SignalHandle h;
  int phase_h = 0;
};

/// Evaluable R_infinity F at one slow point.
struct CorrectorRep {
  PhaseSet phases;
  double p = 0.0;
  double quad_tol = 1e-9;
  std::vector<ClosedPiece> closed;
  std::vector<QuadPiece> quad;

  bool empty() const { return closed.empty() && quad.empty(); }

  double component(int i, double th0, double xi) const {
    double v = 0.0;
    for (const auto& c : closed) {
      if (c.component != i) continue;
      double x = c.factor * (*c.primitive)(th0 + phases.omega[c.phase_a] * xi, kFastOrder);
      if (c.plain) x *= (*c.plain)(th0 + phases.omega[c.phase_b] * xi, kFastOrder);
      v += x;
    }
    for (const auto& q : quad) {
      if (q.component != i) continue;
      v += q.factor * transversal_integral(*q.g, *q.h, phases.omega_of(i), phases.omega[q.phase_g],
                                           phases.omega[q.phase_h], th0, xi, quad_tol);
    }
    return v;
  }

  Vec evaluate(double th0, double xi) const {
    Vec v(phases.N());
    for (int i = 0; i < phases.N(); ++i) v(i) = component(i, th0, xi);
    return v;
  }

  /// Closed pieces written back as type-F terms.
  TypeFFunction closed_as_type_f() const {
    TypeFFunction F{phases, {}};
    for (const auto& c : closed) {
      if (c.plain)
        F.add_product(c.component, c.primitive, c.phase_a, c.plain, c.phase_b, c.factor);
      else
        F.add_single(c.component, c.primitive, c.phase_a, c.factor);
    }
    return F;
  }
};

namespace detail {

inline SignalHandle primitive_handle(const ThetaSignal& s, double p) {
  return make_handle(p > 0 ? decaying_primitive(moment_zero(s, p)) : decaying_primitive(s));
}

}  // namespace detail

/// R_infinity of F with E F = 0. With p > 0 every primitive is taken of the moment-zero approximation;
/// with p == 0 the signals must already have zero mean.
inline CorrectorRep apply_R_infinity(const TypeFFunction& F, double p = 0.0) {
  CorrectorRep rep;
  rep.phases = F.phases;
  rep.p = p;
  const auto& ps = F.phases;
  for (const auto& tm : F.terms) {
    const int i = tm.component;
    const int own = ps.phase_of[static_cast<size_t>(i)];
    const double wi = ps.omega[own];
    if (tm.resonant(own)) throw Error(ErrorKind::Contract, "R_infinity applied to a resonant term");
    if (tm.kind == TypeFTerm::Kind::Single) {
      rep.closed.push_back({i, tm.weight / (ps.omega[tm.phase_f] - wi), detail::primitive_handle(*tm.f, p),
                            tm.phase_f, nullptr, 0});
      continue;
    }
    if (tm.phase_f == tm.phase_g) {
      rep.closed.push_back({i, tm.weight / (ps.omega[tm.phase_f] - wi),
                            detail::primitive_handle(product(*tm.f, *tm.g), p), tm.phase_f, nullptr, 0});
    } else if (tm.phase_f == own) {
      rep.closed.push_back({i, tm.weight / (ps.omega[tm.phase_g] - wi), detail::primitive_handle(*tm.g, p),
                            tm.phase_g, tm.f, tm.phase_f});
    } else if (tm.phase_g == own) {
      rep.closed.push_back({i, tm.weight / (ps.omega[tm.phase_f] - wi), detail::primitive_handle(*tm.f, p),
                            tm.phase_f, tm.g, tm.phase_g});
    } else {
      SignalHandle g = tm.f, h = tm.g;
      if (p > 0) {
        g = make_handle(moment_zero(*g, p));
        h = make_handle(moment_zero(*h, p));
      }
      rep.quad.push_back({i, tm.weight, g, tm.phase_f, h, tm.phase_g});
    }
  }
  return rep;
}

/// Sup over components of |(d_xi - omega_i d_theta0) R F - (I - E) F| on the given sample points.
inline double fast_operator_residual(const CorrectorRep& U, const TypeFFunction& F, const std::vector<double>& th0s,
                                     const std::vector<double>& xis, double h = 1e-3) {
  const TypeFFunction rhs = complement_E(F);
  double worst = 0.0;
  for (double th : th0s)
    for (double xi : xis)
      for (int i = 0; i < U.phases.N(); ++i) {
        const double dxi = (U.component(i, th, xi + h) - U.component(i, th, xi - h)) / (2 * h);
        const double dth = (U.component(i, th + h, xi) - U.component(i, th - h, xi)) / (2 * h);
        worst = std::max(worst, std::abs(dxi - U.phases.omega_of(i) * dth - rhs.component(i, th, xi)));
      }
  return worst;
}

// ---------------------------------------------------------------------------------------------
// First corrector assembled from two consecutive profile iterates.

namespace detail {

/// Theta samples of a profile column at ray coordinates (s, x), bilinear in (s, x).
inline std::vector<double> profile_slice(const ProfileSet& P, const std::vector<double>& data, double s, double x,
                                         bool ds = false) {
  const GridSpec& g = P.grid;
  std::vector<double> out(static_cast<size_t>(g.ntheta), 0.0);
  if (data.empty() || s < 0) return out;
  if (s > g.T * (1 + 1e-12)) throw Error(ErrorKind::Precondition, "ray coordinate beyond the profile horizon");
  const double fs = std::min(s / g.ds(), g.nt - 1.0), fx = std::min(std::max(x, 0.0) / g.dx(), g.nx - 1.0);
  const int is = std::min(static_cast<int>(fs), g.nt - 2), ix = std::min(static_cast<int>(fx), g.nx - 2);
  const double ws = fs - is, wx = fx - ix;
  auto add = [&](int a, int b, double w) {
    if (w == 0.0) return;
    if (!ds) {
      const double* d = data.data() + g.index(a, b, 0);
      for (int q = 0; q < g.ntheta; ++q) out[q] += w * d[q];
      return;
    }
    const int lo = std::max(a - 1, 0), hi = std::min(a + 1, g.nt - 1);
    const double* dl = data.data() + g.index(lo, b, 0);
    const double* dh = data.data() + g.index(hi, b, 0);
    const double inv = 1.0 / ((hi - lo) * g.ds());
    for (int q = 0; q < g.ntheta; ++q) out[q] += w * (dh[q] - dl[q]) * inv;
  };
  add(is, ix, (1 - ws) * (1 - wx));
  add(is, ix + 1, (1 - ws) * wx);
  add(is + 1, ix, ws * (1 - wx));
  add(is + 1, ix + 1, ws * wx);
  return out;
}

}  // namespace detail

/// (I - E) of the modified first-corrector source at the slow point (t, x_d):
///   F_i = sum_k [e(i,k) sigma^n_k - V0(i,k) d_t sigma^{n+1}_k] - sum_{a,b} T(i,a,b) sigma^n_a d_theta sigma^{n+1}_b,
/// with every profile replaced by its moment-zero approximation and each off-phase self product by (.)_p.
inline TypeFFunction corrector_source(const ProfileSet& Pn, const ProfileSet& Pnp1, const InteractionCoeffs& c,
                                      const PhaseTable& tab, double p, double t, double xd) {
  TypeFFunction F{phase_set(tab), {}};
  const int N = c.N;
  const double Theta = Pnp1.grid.Theta;
  std::vector<SignalHandle> sn(N), sdth(N), sdt(N);
  for (int k = 0; k < N; ++k) {
    if (!Pnp1.active(k)) continue;
    const double s = t - Pnp1.kappa(k) * xd;
    if (s <= 0) continue;
    const auto& dn = Pn.active(k) ? Pn.sigma[static_cast<size_t>(k)] : Pnp1.sigma[static_cast<size_t>(k)];
    sn[k] = make_handle(moment_zero(ThetaSignal(Theta, detail::profile_slice(Pn, dn, s, xd)), p));
    const ThetaSignal np1 = moment_zero(ThetaSignal(Theta, detail::profile_slice(Pnp1, Pnp1.sigma[k], s, xd)), p);
    sdth[k] = make_handle(theta_derivative(np1));
    sdt[k] = make_handle(moment_zero(ThetaSignal(Theta, detail::profile_slice(Pnp1, Pnp1.sigma[k], s, xd, true)), p));
  }
  const auto& ph = F.phases.phase_of;
  for (int i = 0; i < N; ++i) {
    for (int k = 0; k < N; ++k) {
      if (!sn[k]) continue;
      F.add_single(i, sn[k], ph[k], c.e(i, k));
      F.add_single(i, sdt[k], ph[k], -c.V[0](i, k));
    }
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) {
        const double w = c.t(i, a, b);
        if (w == 0.0 || !sn[a] || !sdth[b]) continue;
        if (ph[a] == ph[b] && ph[a] != ph[i])
          F.add_single(i, make_handle(nontransversal_product(*sn[a], *sdth[b], p)), ph[a], -w);
        else
          F.add_product(i, sn[a], ph[a], sdth[b], ph[b], -w);
      }
  }
  return complement_E(F);
}

struct CorrectorOptions {
  double p = 0.5;
  int stride_t = 4;
  int stride_x = 4;
  double quad_tol = 1e-9;
};

/// Corrector representations on a coarse (t, x_d) lattice, interpolated bilinearly between nodes.
class CorrectorField {
 public:
  CorrectorField() = default;
  CorrectorField(double T, double X, int nt, int nx) : T_(T), X_(X), nt_(nt), nx_(nx) {
    reps_.resize(static_cast<size_t>(nt) * nx);
  }

  int nt() const { return nt_; }
  int nx() const { return nx_; }
  double t_node(int i) const { return T_ * i / (nt_ - 1); }
  double x_node(int j) const { return X_ * j / (nx_ - 1); }
  CorrectorRep& rep(int i, int j) { return reps_[static_cast<size_t>(i) * nx_ + j]; }
  const CorrectorRep& rep(int i, int j) const { return reps_[static_cast<size_t>(i) * nx_ + j]; }

  /// Coefficients along the columns of R at slow point (t, x_d) and fast point (theta0, xi).
  Vec coefficients(double t, double xd, double th0, double xi) const {
    const double ft = std::clamp(t / T_ * (nt_ - 1), 0.0, nt_ - 1.0);
    const double fx = std::clamp(xd / X_ * (nx_ - 1), 0.0, nx_ - 1.0);
    const int i = std::min(static_cast<int>(ft), nt_ - 2), j = std::min(static_cast<int>(fx), nx_ - 2);
    const double wt = ft - i, wx = fx - j;
    Vec v = Vec::Zero(static_cast<Eigen::Index>(rep(0, 0).phases.N()));
    auto add = [&](int a, int b, double w) {
      if (w != 0.0 && !rep(a, b).empty()) v += w * rep(a, b).evaluate(th0, xi);
    };
    add(i, j, (1 - wt) * (1 - wx));
    add(i, j + 1, (1 - wt) * wx);
    add(i + 1, j, wt * (1 - wx));
    add(i + 1, j + 1, wt * wx);
    return v;
  }

  /// Physical corrector U^1(x, phi_0/eps, x_d/eps) for d = 1 data.
  Vec evaluate(const PhaseTable& tab, double eps, double t, double xd) const {
    return tab.R * coefficients(t, xd, tab.beta(0) * t / eps, xd / eps);
  }

  double sup_closed_norm() const {
    double m = 0.0;
    for (const auto& r : reps_)
      for (const auto& c : r.closed) {
        double v = std::abs(c.factor) * c.primitive->sup();
        if (c.plain) v *= c.plain->sup();
        m = std::max(m, v);
      }
    return m;
  }

 private:
  double T_ = 1.0, X_ = 1.0;
  int nt_ = 2, nx_ = 2;
  std::vector<CorrectorRep> reps_;
};

/// First corrector from iterates n (Pn) and n+1 (Pnp1) on the same profile grid.
inline CorrectorField build_corrector(const ProfileSet& Pn, const ProfileSet& Pnp1, const InteractionCoeffs& c,
                                      const PhaseTable& tab, const CorrectorOptions& opt) {
  const GridSpec& g = Pnp1.grid;
  if (Pn.grid.nt != g.nt || Pn.grid.nx != g.nx || Pn.grid.ntheta != g.ntheta || Pn.grid.Theta != g.Theta)
    throw Error(ErrorKind::Precondition, "corrector iterates on different grids");
  if (!(opt.p > 0 && opt.p < 1)) throw Error(ErrorKind::Precondition, "cutoff parameter p must lie in (0,1)");
  const int nt = (g.nt - 1) / opt.stride_t + 1, nx = (g.nx - 1) / opt.stride_x + 1;
  CorrectorField field(g.ds() * (nt - 1) * opt.stride_t, g.dx() * (nx - 1) * opt.stride_x, nt, nx);
  parallel_for(nt * nx, [&](int idx) {
    const int i = idx / nx, j = idx % nx;
    const TypeFFunction F = corrector_source(Pn, Pnp1, c, tab, opt.p, field.t_node(i), field.x_node(j));
    CorrectorRep r = apply_R_infinity(F, 0.0);
    r.p = opt.p;
    r.quad_tol = opt.quad_tol;
    field.rep(i, j) = std::move(r);
  });
  return field;
}

/// Uses ProfileSet::previous as iterate n when present.
inline CorrectorField build_corrector(const ProfileSet& P, const InteractionCoeffs& c, const PhaseTable& tab,
                                      const CorrectorOptions& opt) {
  if (P.previous.empty()) return build_corrector(P, P, c, tab, opt);
  ProfileSet Pn = P;
  Pn.sigma = P.previous;
  return build_corrector(Pn, P, c, tab, opt);
}

}  // namespace pulse_optics
