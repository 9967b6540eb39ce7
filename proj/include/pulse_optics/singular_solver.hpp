#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "pulse.hpp"
#include "system.hpp"

namespace pulse_optics {

/// Uniform (t, x_d) grid for the reference solve; snapshots are kept at n_snap evenly spaced times.
struct FineGrid {
  double T = 1.0;
  double X = 2.0;
  int nx = 2;
  int nt = 1;
  int n_snap = 8;
  double beta0 = 1.0;
  double cfl_limit = 1.2;

  double dx() const { return X / (nx - 1); }
  double dt() const { return T / nt; }
  double x(int j) const { return j * dx(); }
  int snap_step(int s) const { return (s + 1) * (nt / n_snap); }
  double snap_time(int s) const { return snap_step(s) * dt(); }
};

/// dx = eps / ppw (one wavelength of the boundary phase is eps), dt from cfl and the frozen speeds
/// times a margin; nt is rounded up to a multiple of n_snap.
inline FineGrid fine_grid(const SystemSpec& s, double eps, double T, double X, int ppw = 24, double cfl = 0.8,
                          int n_snap = 8, double beta0 = 1.0, double speed_margin = 1.25) {
  if (s.d != 1) throw Error(ErrorKind::Precondition, "the reference solver handles d = 1 only");
  if (!(eps > 0) || ppw < 4) throw Error(ErrorKind::Configuration, "fine grid needs eps > 0 and ppw >= 4");
  FineGrid g;
  g.T = T;
  g.X = X;
  g.beta0 = beta0;
  g.n_snap = n_snap;
  g.nx = static_cast<int>(std::ceil(X * ppw / eps)) + 1;
  Eigen::EigenSolver<Mat> es(s.A[0], false);
  const double smax = es.eigenvalues().cwiseAbs().maxCoeff() * speed_margin;
  const double dt = cfl * g.dx() / smax;
  const int steps = static_cast<int>(std::ceil(T / dt));
  g.nt = ((steps + n_snap - 1) / n_snap) * n_snap;
  return g;
}

/// Same domain with dx and dt halved; coarse node j sits on fine node 2j.
inline FineGrid refined(const FineGrid& g) {
  FineGrid r = g;
  r.nx = 2 * (g.nx - 1) + 1;
  r.nt = 2 * g.nt;
  return r;
}

struct FineSolution {
  FineGrid grid;
  double eps = 0.0;
  std::vector<double> times;
  std::vector<Mat> u;       // N x nx at each snapshot time
  std::vector<Mat> u_lo;    // neighbours in time for the residual
  std::vector<Mat> u_hi;
  std::vector<bool> centered;
  int newton_max_iterations = 0;
  long newton_total_iterations = 0;
  double bc_residual_sup = 0.0;
  double max_eps_u = 0.0;
  double max_cfl = 0.0;
  int iterations = 0;
  std::vector<double> diffs;
  std::vector<double> ratios;

  Vec at(int snap, int j) const { return u[static_cast<size_t>(snap)].col(j); }
};

struct ExactOptions {
  double validity = 0.5;  // abort when |eps u| exceeds this
  double newton_tol = 1e-12;
  int newton_max = 20;
  double frozen_tol = 1e-12;  // |eps w| below this uses the decomposition at 0
};

namespace detail {

struct CharSplit {
  Vec lam;
  Mat R, L;
};

inline CharSplit char_split(const Mat& A) {
  Eigen::EigenSolver<Mat> es(A);
  CharSplit c;
  c.lam = es.eigenvalues().real();
  c.R = es.eigenvectors().real();
  c.L = c.R.inverse();
  return c;
}

/// Per-step stage states of one solve: post-projection stage values and pre-projection boundary states.
struct StageHistory {
  int nx = 0, N = 0, nt = 0;
  std::vector<double> post;  // (nt + 1) x 4 x N x nx
  std::vector<double> pre;   // nt x 4 x N

  void init(int nt_, int N_, int nx_) {
    nt = nt_;
    N = N_;
    nx = nx_;
    post.assign(static_cast<size_t>(nt + 1) * 4 * N * nx, 0.0);
    pre.assign(static_cast<size_t>(nt) * 4 * N, 0.0);
  }
  double* post_at(int m, int k) { return post.data() + (static_cast<size_t>(m) * 4 + k) * N * nx; }
  const double* post_at(int m, int k) const { return post.data() + (static_cast<size_t>(m) * 4 + k) * N * nx; }
  double* pre_at(int m, int k) { return pre.data() + (static_cast<size_t>(m) * 4 + k) * N; }
  const double* pre_at(int m, int k) const { return pre.data() + (static_cast<size_t>(m) * 4 + k) * N; }
};

class FineStepper {
 public:
  FineStepper(const SystemSpec& s, const BoundaryPulse& G, double eps, const FineGrid& g, const ExactOptions& o)
      : s_(s), G_(G), eps_(eps), g_(g), o_(o) {
    if (s.d != 1) throw Error(ErrorKind::Precondition, "the reference solver handles d = 1 only");
    if (G.amplitude.size() != s.p) throw Error(ErrorKind::Configuration, "pulse amplitude must have p entries");
    if (g.nx < 8 || g.nt < 1 || g.nt % g.n_snap != 0) throw Error(ErrorKind::Configuration, "fine grid too small");
    base_ = char_split(s.A[0]);
    int npos = 0;
    for (Eigen::Index k = 0; k < base_.lam.size(); ++k) npos += base_.lam(k) > 0;
    if (npos != s.p) throw Error(ErrorKind::Configuration, "boundary rank does not match the incoming count");
    minus_ = {{{0, 1, 2}, {-1, 0, 1}, {-2, -1, 0, 1}, {-3, -2, -1, 0, 1, 2}}};
    plus_ = {{{0, 1, 2}, {-1, 0, 1, 2}, {-2, -1, 0, 1, 2, 3}, {-2, -1, 0, 1, 2, 3}}};
    for (int c = 0; c < 4; ++c) {
      wminus_[c] = derivative_weights(minus_[c]);
      wplus_[c] = derivative_weights(plus_[c]);
    }
  }

  Vec boundary_data(double t) const { return G_(t, g_.beta0 * t / eps_); }

  CharSplit split_at(const Vec& w) const {
    if (eps_ * w.cwiseAbs().maxCoeff() < o_.frozen_tol) return base_;
    return char_split(s_.A_at(0, eps_ * w));
  }

  /// K = -A(eps W) d_x U (characteristic upwinding frozen at W) + F0 S.
  double rhs(const Mat& U, const Mat& W, const Mat& S, Mat& K) const {
    const int nx = g_.nx, N = s_.N;
    const double inv = 1.0 / g_.dx();
    std::vector<double> smax(static_cast<size_t>(nx), 0.0);
    parallel_for(nx, [&](int j) {
      const CharSplit cs = split_at(W.col(j));
      const int cm = std::min(j, 3), cp = std::min(j, 2);
      Vec dm = Vec::Zero(N), dp = Vec::Zero(N);
      for (size_t a = 0; a < minus_[cm].size(); ++a) {
        const int jj = j + minus_[cm][a];
        if (jj < nx) dm += wminus_[cm][a] * U.col(jj);
      }
      for (size_t a = 0; a < plus_[cp].size(); ++a) {
        const int jj = j + plus_[cp][a];
        if (jj < nx) dp += wplus_[cp][a] * U.col(jj);
      }
      Vec out = s_.F0 * S.col(j);
      double sm = 0.0;
      for (int k = 0; k < N; ++k) {
        const double lk = cs.lam(k);
        const double proj = cs.L.row(k).dot(lk > 0 ? dm : dp) * inv;
        out -= lk * proj * cs.R.col(k);
        sm = std::max(sm, std::abs(lk));
      }
      K.col(j) = out;
      smax[static_cast<size_t>(j)] = sm;
    });
    return *std::max_element(smax.begin(), smax.end());
  }

  /// Solve B(eps u) u = G(t) for the incoming characteristic variables of u*, split frozen at u*.
  Vec project_exact(const Vec& ustar, double t, int& iters) const {
    const CharSplit cs = split_at(ustar);
    const Vec c0 = cs.L * ustar;
    std::vector<int> in;
    for (int k = 0; k < s_.N; ++k)
      if (cs.lam(k) > 0) in.push_back(k);
    const int p = static_cast<int>(in.size());
    if (p != s_.p) throw Error(ErrorKind::NewtonFailure, "incoming count changed inside the validity ball");
    const Vec Gt = boundary_data(t);
    Vec c = c0;
    auto state = [&](const Vec& cc) { return Vec(cs.R * cc); };
    for (iters = 0; iters <= o_.newton_max; ++iters) {
      const Vec u = state(c);
      const Mat Bu = s_.B_at(eps_ * u);
      const Vec F = Bu * u - Gt;
      if (F.cwiseAbs().maxCoeff() <= o_.newton_tol * std::max(1.0, Gt.cwiseAbs().maxCoeff())) return u;
      if (iters == o_.newton_max) break;
      Mat J(p, p);
      for (int a = 0; a < p; ++a) {
        const Vec r = cs.R.col(in[a]);
        Vec col = Bu * r;
        for (size_t k = 0; k < s_.dB.size(); ++k) col += eps_ * r(static_cast<Eigen::Index>(k)) * (s_.dB[k] * u);
        J.col(a) = col;
      }
      const Vec step = J.partialPivLu().solve(F);
      // damping: halve until the residual decreases
      double lambda = 1.0;
      for (int h = 0; h < 30; ++h) {
        Vec trial = c;
        for (int a = 0; a < p; ++a) trial(in[a]) -= lambda * step(a);
        const Vec ut = state(trial);
        if ((s_.B_at(eps_ * ut) * ut - Gt).norm() < F.norm() || h == 29) {
          c = trial;
          break;
        }
        lambda *= 0.5;
      }
    }
    throw Error(ErrorKind::NewtonFailure, "boundary Newton iteration did not converge");
  }

  /// Linear boundary solve with the split frozen at wpre and B frozen at wpost.
  Vec project_linear(const Vec& ustar, const Vec& wpre, const Vec& wpost, double t) const {
    const CharSplit cs = split_at(wpre);
    Vec c = cs.L * ustar;
    std::vector<int> in;
    for (int k = 0; k < s_.N; ++k)
      if (cs.lam(k) > 0) in.push_back(k);
    const int p = static_cast<int>(in.size());
    if (p != s_.p) throw Error(ErrorKind::NewtonFailure, "incoming count changed inside the validity ball");
    const Mat Bw = s_.B_at(eps_ * wpost);
    Vec rhs = boundary_data(t);
    Mat J(p, p);
    for (int a = 0; a < p; ++a) J.col(a) = Bw * cs.R.col(in[a]);
    for (int k = 0; k < s_.N; ++k)
      if (cs.lam(k) <= 0) rhs -= c(k) * (Bw * cs.R.col(k));
    const Vec ci = J.partialPivLu().solve(rhs);
    for (int a = 0; a < p; ++a) c(in[a]) = ci(a);
    return cs.R * c;
  }

  double bc_residual(const Vec& u, double t) const {
    return (s_.B_at(eps_ * u) * u - boundary_data(t)).cwiseAbs().maxCoeff();
  }

  const FineGrid& grid() const { return g_; }

 private:
  const SystemSpec& s_;
  const BoundaryPulse& G_;
  double eps_;
  FineGrid g_;
  ExactOptions o_;
  CharSplit base_;
  std::array<std::vector<int>, 4> minus_, plus_;
  std::array<std::vector<double>, 4> wminus_, wplus_;
};

/// RK4 method of lines. With prev == nullptr the coefficients follow the solution itself; otherwise they
/// are taken from the stage history of the previous iterate (one linear problem of the Picard scheme).
inline FineSolution run_fine(const SystemSpec& s, const BoundaryPulse& G, double eps, const FineGrid& g,
                             const ExactOptions& o, const StageHistory* prev, StageHistory* record) {
  FineStepper st(s, G, eps, g, o);
  const int N = s.N, nx = g.nx, nt = g.nt;
  const double dt = g.dt();
  FineSolution sol;
  sol.grid = g;
  sol.eps = eps;
  if (record) record->init(nt, N, nx);
  Mat u = Mat::Zero(N, nx), K1(N, nx), K2(N, nx), K3(N, nx), K4(N, nx), Us(N, nx);
  Mat lo2 = u, lo1 = u;

  auto view = [&](const double* d) { return Eigen::Map<const Mat>(d, N, nx); };
  auto project = [&](Mat& U, double t, int m, int k) {
    const Vec ustar = U.col(0);
    if (record) Eigen::Map<Vec>(record->pre_at(m, k), N) = ustar;
    if (prev) {
      const Vec wpre = Eigen::Map<const Vec>(prev->pre_at(m, k), N);
      const Vec wpost = k < 3 ? Vec(view(prev->post_at(m, k + 1)).col(0)) : Vec(view(prev->post_at(m + 1, 0)).col(0));
      U.col(0) = st.project_linear(ustar, wpre, wpost, t);
    } else {
      int it = 0;
      U.col(0) = st.project_exact(ustar, t, it);
      sol.newton_max_iterations = std::max(sol.newton_max_iterations, it);
      sol.newton_total_iterations += it;
    }
    sol.bc_residual_sup = std::max(sol.bc_residual_sup, prev ? 0.0 : st.bc_residual(U.col(0), t));
  };
  auto coef = [&](const Mat& U, int m, int k) -> Mat {
    return prev ? Mat(view(prev->post_at(m, k))) : U;
  };
  auto store = [&](int m, int k, const Mat& U) {
    if (record) Eigen::Map<Mat>(record->post_at(m, k), N, nx) = U;
  };

  int next_snap = 0;
  for (int m = 0; m < nt; ++m) {
    const double t = m * dt;
    {
      store(m, 0, u);
      Mat W = coef(u, m, 0);
      double smax = st.rhs(u, W, u, K1);
      Us = u + 0.5 * dt * K1;
      project(Us, t + 0.5 * dt, m, 0);
      store(m, 1, Us);
      W = coef(Us, m, 1);
      smax = std::max(smax, st.rhs(Us, W, Us, K2));
      Us = u + 0.5 * dt * K2;
      project(Us, t + 0.5 * dt, m, 1);
      store(m, 2, Us);
      W = coef(Us, m, 2);
      smax = std::max(smax, st.rhs(Us, W, Us, K3));
      Us = u + dt * K3;
      project(Us, t + dt, m, 2);
      store(m, 3, Us);
      W = coef(Us, m, 3);
      smax = std::max(smax, st.rhs(Us, W, Us, K4));
      u += dt / 6.0 * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
      project(u, t + dt, m, 3);
      const double cfl = smax * dt / g.dx();
      sol.max_cfl = std::max(sol.max_cfl, cfl);
      if (cfl > g.cfl_limit) throw Error(ErrorKind::CflViolation, "characteristic speed exceeds the grid CFL limit");
      const double eu = eps * u.cwiseAbs().maxCoeff();
      sol.max_eps_u = std::max(sol.max_eps_u, eu);
      if (!std::isfinite(eu) || eu > o.validity)
        throw Error(ErrorKind::ValidityBall, "solution left the validity ball |eps u| <= delta");
    }
    const int step = m + 1;
    // snapshot bookkeeping: keep (step-1, step, step+1), or (nt-2, nt-1, nt) for the last one
    if (next_snap < g.n_snap) {
      const int ms = g.snap_step(next_snap);
      const bool last = ms == nt;
      if ((!last && step == ms + 1) || (last && step == nt)) {
        sol.times.push_back(ms * dt);
        sol.u.push_back(last ? u : lo1);
        sol.u_lo.push_back(last ? lo1 : lo2);
        sol.u_hi.push_back(last ? lo2 : u);
        sol.centered.push_back(!last);
        if (last) {
          // backward stencil uses (nt-2, nt-1, nt): stored as lo = nt-2, hi = nt-1
          sol.u_lo.back() = lo2;
          sol.u_hi.back() = lo1;
        }
        ++next_snap;
      }
    }
    lo2 = lo1;
    lo1 = u;
  }
  if (record) Eigen::Map<Mat>(record->post_at(nt, 0), N, nx) = u;
  return sol;
}

}  // namespace detail

inline FineSolution solve_exact(const SystemSpec& s, const BoundaryPulse& G, double eps, const FineGrid& g,
                                const ExactOptions& o = {}) {
  return detail::run_fine(s, G, eps, g, o, nullptr, nullptr);
}

inline double sup_difference(const FineSolution& a, const FineSolution& b) {
  if (a.u.size() != b.u.size() || a.grid.nx != b.grid.nx)
    throw Error(ErrorKind::DimensionMismatch, "fine solutions on different grids");
  double m = 0.0;
  for (size_t s = 0; s < a.u.size(); ++s) m = std::max(m, (a.u[s] - b.u[s]).cwiseAbs().maxCoeff());
  return m;
}

/// Sup over snapshots of |a - b| on the nodes of the coarser grid (b finer by a factor 2^k).
inline double sup_difference_coarse(const FineSolution& a, const FineSolution& b) {
  const int r = (b.grid.nx - 1) / (a.grid.nx - 1);
  if (r * (a.grid.nx - 1) != b.grid.nx - 1 || a.u.size() != b.u.size())
    throw Error(ErrorKind::DimensionMismatch, "grids are not nested");
  double m = 0.0;
  for (size_t s = 0; s < a.u.size(); ++s)
    for (int j = 0; j < a.grid.nx; ++j) m = std::max(m, (a.u[s].col(j) - b.u[s].col(r * j)).cwiseAbs().maxCoeff());
  return m;
}

/// Picard iteration of linear problems with coefficients, boundary matrix and source frozen at the
/// previous iterate. Its fixed point is the solve_exact discretization.
inline FineSolution picard_solve_singular(const SystemSpec& s, const BoundaryPulse& G, double eps, const FineGrid& g,
                                          double tol = 1e-10, int max_iter = 40, const ExactOptions& o = {}) {
  detail::StageHistory prev, next;
  prev.init(g.nt, s.N, g.nx);
  std::vector<double> diffs, ratios;
  FineSolution sol;
  int bad = 0;
  for (int n = 1; n <= max_iter; ++n) {
    sol = detail::run_fine(s, G, eps, g, o, &prev, &next);
    double d = 0.0;
    for (int m = 0; m <= g.nt; ++m) {
      const double* a = prev.post_at(m, 0);
      const double* b = next.post_at(m, 0);
      for (size_t i = 0; i < static_cast<size_t>(s.N) * g.nx; ++i) d = std::max(d, std::abs(a[i] - b[i]));
    }
    diffs.push_back(d);
    if (diffs.size() >= 2 && diffs[diffs.size() - 2] > 0) {
      ratios.push_back(d / diffs[diffs.size() - 2]);
      bad = ratios.back() >= 1.0 ? bad + 1 : 0;
      if (bad >= 2) throw Error(ErrorKind::NonContraction, "T too large for fixed-point regime");
    }
    std::swap(prev, next);
    sol.iterations = n;
    if (d <= tol) break;
  }
  sol.diffs = diffs;
  sol.ratios = ratios;
  return sol;
}

/// Closed-form solution of the linear constant-coefficient problem with F = 0: each incoming
/// characteristic variable carries the reflected boundary datum at its retarded time.
inline Vec linear_oracle(const SystemSpec& s, const BoundaryPulse& G, double eps, double t, double x,
                         double beta0 = 1.0) {
  if (!s.is_linear() || s.F0.cwiseAbs().maxCoeff() != 0.0 || s.d != 1)
    throw Error(ErrorKind::Contract, "linear oracle needs d = 1, dA = 0, dB = 0 and F = 0");
  const detail::CharSplit cs = detail::char_split(s.A[0]);
  std::vector<int> in;
  for (int k = 0; k < s.N; ++k)
    if (cs.lam(k) > 0) in.push_back(k);
  Mat Bin(s.p, static_cast<Eigen::Index>(in.size()));
  for (size_t a = 0; a < in.size(); ++a) Bin.col(static_cast<Eigen::Index>(a)) = s.B0 * cs.R.col(in[a]);
  const auto lu = Bin.partialPivLu();
  Vec u = Vec::Zero(s.N);
  for (size_t a = 0; a < in.size(); ++a) {
    const double tau = t - x / cs.lam(in[a]);
    if (tau <= 0) continue;
    const Vec c = lu.solve(G(tau, beta0 * tau / eps));
    u += c(static_cast<Eigen::Index>(a)) * cs.R.col(in[a]);
  }
  return u;
}

/// A FineSolution sampled from a closed form, with the same snapshot layout as the solver output.
inline FineSolution sample_solution(const FineGrid& g, double eps, int N,
                                    const std::function<Vec(double, double)>& f) {
  FineSolution sol;
  sol.grid = g;
  sol.eps = eps;
  const double dt = g.dt();
  auto field = [&](double t) {
    Mat U(N, g.nx);
    for (int j = 0; j < g.nx; ++j) U.col(j) = f(t, g.x(j));
    return U;
  };
  for (int s = 0; s < g.n_snap; ++s) {
    const int ms = g.snap_step(s);
    const bool last = ms == g.nt;
    sol.times.push_back(ms * dt);
    sol.u.push_back(field(ms * dt));
    sol.u_lo.push_back(field((last ? ms - 2 : ms - 1) * dt));
    sol.u_hi.push_back(field((last ? ms - 1 : ms + 1) * dt));
    sol.centered.push_back(!last);
  }
  return sol;
}

struct ResidualNorms {
  double pde_residual_sup = 0.0;
  double bc_residual_sup = 0.0;
};

/// Interior residual of d_t u + A(eps u) d_x u - F u (second-order in t, fourth-order in x) and the
/// boundary residual at every snapshot, combined with the solver's own record.
inline ResidualNorms residual_norms(const FineSolution& sol, const SystemSpec& s, const BoundaryPulse& G) {
  ResidualNorms r;
  const FineGrid& g = sol.grid;
  const double dt = g.dt(), dx = g.dx(), eps = sol.eps;
  for (size_t k = 0; k < sol.u.size(); ++k) {
    const Mat& U = sol.u[k];
    Mat Ut;
    if (sol.centered[k])
      Ut = (sol.u_hi[k] - sol.u_lo[k]) / (2 * dt);
    else
      Ut = (3.0 * U - 4.0 * sol.u_hi[k] + sol.u_lo[k]) / (2 * dt);
    for (int j = 2; j + 2 < g.nx; ++j) {
      const Vec ux = (U.col(j - 2) - 8.0 * U.col(j - 1) + 8.0 * U.col(j + 1) - U.col(j + 2)) / (12 * dx);
      const Vec res = Ut.col(j) + s.A_at(0, eps * U.col(j)) * ux - s.F0 * U.col(j);
      r.pde_residual_sup = std::max(r.pde_residual_sup, res.cwiseAbs().maxCoeff());
    }
    const Vec u0 = U.col(0);
    const Vec Gt = G(sol.times[k], g.beta0 * sol.times[k] / eps);
    r.bc_residual_sup = std::max(r.bc_residual_sup, (s.B_at(eps * u0) * u0 - Gt).cwiseAbs().maxCoeff());
  }
  r.bc_residual_sup = std::max(r.bc_residual_sup, sol.bc_residual_sup);
  return r;
}

/// Binary layout: "POFINE01", uint64 header length, JSON header, then snapshots as little-endian f64.
inline void save_fine_solution(const std::string& path, const FineSolution& sol) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path);
  json h;
  h["T"] = sol.grid.T;
  h["X"] = sol.grid.X;
  h["nx"] = sol.grid.nx;
  h["nt"] = sol.grid.nt;
  h["n_snap"] = sol.grid.n_snap;
  h["beta0"] = sol.grid.beta0;
  h["eps"] = sol.eps;
  h["N"] = sol.u.empty() ? 0 : sol.u[0].rows();
  h["times"] = sol.times;
  h["newton_max_iterations"] = sol.newton_max_iterations;
  h["bc_residual_sup"] = sol.bc_residual_sup;
  h["max_eps_u"] = sol.max_eps_u;
  const std::string hs = h.dump();
  const uint64_t n = hs.size();
  f.write("POFINE01", 8);
  f.write(reinterpret_cast<const char*>(&n), sizeof n);
  f.write(hs.data(), static_cast<std::streamsize>(n));
  for (const auto& U : sol.u) f.write(reinterpret_cast<const char*>(U.data()), static_cast<std::streamsize>(U.size() * 8));
  if (!f) throw Error(ErrorKind::Io, "write failed for " + path);
}

inline FineSolution load_fine_solution(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path);
  char magic[8];
  uint64_t n = 0;
  f.read(magic, 8);
  f.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!f || std::string(magic, 8) != "POFINE01") throw Error(ErrorKind::Io, path + " is not a fine solution file");
  std::string hs(n, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(n));
  const json h = json::parse(hs);
  FineSolution sol;
  sol.grid.T = h.at("T");
  sol.grid.X = h.at("X");
  sol.grid.nx = h.at("nx");
  sol.grid.nt = h.at("nt");
  sol.grid.n_snap = h.at("n_snap");
  sol.grid.beta0 = h.at("beta0");
  sol.eps = h.at("eps");
  sol.times = h.at("times").get<std::vector<double>>();
  sol.newton_max_iterations = h.at("newton_max_iterations");
  sol.bc_residual_sup = h.at("bc_residual_sup");
  sol.max_eps_u = h.at("max_eps_u");
  const int N = h.at("N");
  for (size_t k = 0; k < sol.times.size(); ++k) {
    Mat U(N, sol.grid.nx);
    f.read(reinterpret_cast<char*>(U.data()), static_cast<std::streamsize>(U.size() * 8));
    sol.u.push_back(U);
  }
  if (!f) throw Error(ErrorKind::Io, "truncated fine solution file " + path);
  return sol;
}

}  // namespace pulse_optics
