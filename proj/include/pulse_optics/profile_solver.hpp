#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "error.hpp"
#include "hyperbolic_model.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "pulse.hpp"
#include "system.hpp"

namespace pulse_optics {

/// Profile grid in ray coordinates: s = t - kappa_m x in [0, T], x in [0, X], theta in [-Theta, Theta).
struct GridSpec {
  double T = 1.0;
  double X = 1.0;
  double Theta = 12.0;
  int nt = 64;
  int nx = 64;
  int ntheta = 512;

  double ds() const { return nt > 1 ? T / (nt - 1) : 0.0; }
  double dx() const { return nx > 1 ? X / (nx - 1) : 0.0; }
  double dtheta() const { return 2.0 * Theta / ntheta; }
  size_t points() const { return static_cast<size_t>(nt) * nx * ntheta; }
  size_t index(int is, int ix, int q) const {
    return (static_cast<size_t>(is) * nx + ix) * ntheta + q;
  }
};

/// Coefficients of the profile and corrector equations, indexed by the columns of PhaseTable::R.
struct InteractionCoeffs {
  int N = 0;
  int d = 1;
  std::vector<double> T;   // T(i,a,b) = l_i sum_j beta_j (dA~_j r_a) r_b
  Mat e;                   // l_i F r_k
  std::vector<Mat> V;      // V[j](i,k) = l_i A~_j r_k, j = 0..d-1
  std::vector<int> mode_of;
  std::vector<int> k_of;
  Vec kappa;               // per column
  Vec omega;               // per column
  double symmetry_defect = 0.0;

  double t(int i, int a, int b) const { return T[(static_cast<size_t>(i) * N + a) * N + b]; }
  double c(int i, int k) const { return t(i, k, k); }
  double dd(int i, int l, int m) const { return t(i, l, m); }
};

namespace detail {

/// A~_j = A_d^{-1} A_j with A_0 = I, and its directional derivative at 0.
inline Mat Atilde(const SystemSpec& s, int j) {
  const Mat Adinv = s.Ad().inverse();
  return j == 0 ? Adinv : Mat(Adinv * s.A[j - 1]);
}

inline Mat dAtilde(const SystemSpec& s, int j, const Vec& w) {
  const Mat Adinv = s.Ad().inverse();
  const Mat dAd = s.dA_dir(s.d - 1, w);
  const Mat Aj = j == 0 ? Mat::Identity(s.N, s.N) : s.A[j - 1];
  Mat out = -Adinv * dAd * Adinv * Aj;
  if (j > 0) out += Adinv * s.dA_dir(j - 1, w);
  return out;
}

/// Mean of the nu roots of the perturbed dispersion relation nearest omega.
inline double perturbed_root(const SystemSpec& s, const Vec& beta, const Vec& u, double omega, int nu) {
  Mat L0 = beta(0) * Mat::Identity(s.N, s.N);
  for (int j = 0; j + 1 < s.d; ++j) L0 += beta(j + 1) * s.A_at(j, u);
  const Mat K = -s.A_at(s.d - 1, u).fullPivLu().solve(L0);
  Eigen::EigenSolver<Mat> es(K, false);
  std::vector<double> w;
  for (Eigen::Index i = 0; i < s.N; ++i) w.push_back(es.eigenvalues()(i).real());
  std::sort(w.begin(), w.end(), [&](double a, double b) { return std::abs(a - omega) < std::abs(b - omega); });
  double m = 0.0;
  for (int k = 0; k < nu; ++k) m += w[static_cast<size_t>(k)];
  return m / nu;
}

}  // namespace detail

/// d omega_m(0) . w by Richardson-extrapolated central differences.
inline double domega_fd(const SystemSpec& s, const PhaseTable& t, int m, const Vec& w) {
  const auto& md = t.modes[m];
  auto D = [&](double h) {
    return (detail::perturbed_root(s, t.beta, h * w, md.omega, md.nu) -
            detail::perturbed_root(s, t.beta, -h * w, md.omega, md.nu)) / (2.0 * h);
  };
  const double h = 1e-3 / std::max(1.0, w.norm());
  return (4.0 * D(h / 2) - D(h)) / 3.0;
}

inline InteractionCoeffs interaction_coefficients(const SystemSpec& s, const PhaseTable& tab) {
  InteractionCoeffs c;
  const int N = s.N;
  c.N = N;
  c.d = s.d;
  c.T.assign(static_cast<size_t>(N) * N * N, 0.0);
  c.kappa.resize(N);
  c.omega.resize(N);
  for (int m = 0; m < tab.M(); ++m)
    for (int k = 0; k < tab.modes[m].nu; ++k) {
      const int col = tab.column(m, k);
      c.mode_of.push_back(m);
      c.k_of.push_back(k);
      c.kappa(col) = tab.modes[m].kappa;
      c.omega(col) = tab.modes[m].omega;
    }
  for (int a = 0; a < N; ++a) {
    Mat S = Mat::Zero(N, N);
    for (int j = 0; j < s.d; ++j) S += tab.beta(j) * detail::dAtilde(s, j, tab.R.col(a));
    const Mat LS = tab.L * S * tab.R;  // (i, b)
    for (int i = 0; i < N; ++i)
      for (int b = 0; b < N; ++b) c.T[(static_cast<size_t>(i) * N + a) * N + b] = LS(i, b);
  }
  c.e = tab.L * (s.Ad().inverse() * s.F0) * tab.R;
  for (int j = 0; j < s.d; ++j) c.V.push_back(tab.L * detail::Atilde(s, j) * tab.R);

  // B^m_{l,k'}(w) = delta_{l k'} D_m(w): off-diagonal entries vanish and the diagonal is l-independent.
  double defect = 0.0;
  for (int m = 0; m < tab.M(); ++m) {
    const int nu = tab.modes[m].nu;
    for (int k = 0; k < nu; ++k) {
      const int ck = tab.column(m, k);
      const double ref = c.t(tab.column(m, 0), ck, tab.column(m, 0));
      for (int l = 0; l < nu; ++l)
        for (int kp = 0; kp < nu; ++kp) {
          const double v = c.t(tab.column(m, l), ck, tab.column(m, kp));
          defect = std::max(defect, l == kp ? std::abs(v - ref) : std::abs(v));
        }
    }
  }
  c.symmetry_defect = defect;
  if (defect > 1e-10) throw Error(ErrorKind::Assumption, "profile coefficient symmetry violated");
  return c;
}

/// Prefactored solve of B(0)(sum_in sigma r) = G - B(0)(sum_out sigma r).
class BoundaryReflection {
 public:
  BoundaryReflection(const SystemSpec& s, const PhaseTable& t) {
    for (int m : t.incoming_set)
      for (int k = 0; k < t.modes[m].nu; ++k) in_cols_.push_back(t.column(m, k));
    for (int m : t.outgoing_set)
      for (int k = 0; k < t.modes[m].nu; ++k) out_cols_.push_back(t.column(m, k));
    Mat Bin(s.p, static_cast<Eigen::Index>(in_cols_.size()));
    for (size_t i = 0; i < in_cols_.size(); ++i) Bin.col(static_cast<Eigen::Index>(i)) = s.B0 * t.R.col(in_cols_[i]);
    Bout_ = Mat(s.p, static_cast<Eigen::Index>(out_cols_.size()));
    for (size_t i = 0; i < out_cols_.size(); ++i)
      Bout_.col(static_cast<Eigen::Index>(i)) = s.B0 * t.R.col(out_cols_[i]);
    if (Bin.rows() != Bin.cols() || min_singular_value(Bin) < 1e-12 * std::max(1.0, Bin.norm()))
      throw Error(ErrorKind::Configuration, "reflection matrix is singular");
    lu_ = Bin.partialPivLu();
  }

  /// Incoming values (ordered as incoming_columns()) from G and the outgoing traces.
  Vec solve(const Vec& G, const Vec& outgoing) const {
    if (outgoing.size() == 0) return lu_.solve(G);
    return lu_.solve(G - Bout_ * outgoing);
  }
  Vec solve(const Vec& G) const { return lu_.solve(G); }

  const std::vector<int>& incoming_columns() const { return in_cols_; }
  const std::vector<int>& outgoing_columns() const { return out_cols_; }

 private:
  std::vector<int> in_cols_, out_cols_;
  Mat Bout_;
  Eigen::PartialPivLU<Mat> lu_;
};

enum class ThetaScheme { Upwind1, Upwind3 };

struct ProfileOptions {
  double tol = 1e-10;
  int max_iter = 60;
  ThetaScheme scheme = ThetaScheme::Upwind1;
  double cfl = 0.9;
  int max_substeps = 64;
  double preshock_cap = 0.8;
};

/// sigma[c] holds the grid function of column c on its ray grid; empty for outgoing columns.
struct ProfileSet {
  GridSpec grid;
  std::vector<std::vector<double>> sigma;
  std::vector<std::vector<double>> previous;  // iterate n when sigma is iterate n+1
  Vec kappa;
  Vec omega;
  Vec beta;
  int iterations = 0;
  std::vector<double> diffs;
  std::vector<double> ratios;
  double residual_sup = 0.0;
  double residual_C = 0.0;
  double max_shock_indicator = 0.0;

  int N() const { return static_cast<int>(sigma.size()); }
  bool active(int c) const { return !sigma[static_cast<size_t>(c)].empty(); }
};

namespace detail {

inline void upwind1_rhs(const std::vector<double>& u, const std::vector<double>& v, const std::vector<double>& f,
                        double dth, std::vector<double>& out) {
  const int n = static_cast<int>(u.size());
  for (int q = 0; q < n; ++q) {
    const int qm = q == 0 ? n - 1 : q - 1, qp = q == n - 1 ? 0 : q + 1;
    const double du = v[q] > 0 ? u[q] - u[qm] : u[qp] - u[q];
    out[q] = -v[q] * du / dth + f[q];
  }
}

inline void upwind3_rhs(const std::vector<double>& u, const std::vector<double>& v, const std::vector<double>& f,
                        double dth, std::vector<double>& out) {
  const int n = static_cast<int>(u.size());
  auto at = [&](int q) { return u[static_cast<size_t>(((q % n) + n) % n)]; };
  for (int q = 0; q < n; ++q) {
    double du;
    if (v[q] > 0)
      du = (at(q - 2) - 6.0 * at(q - 1) + 3.0 * at(q) + 2.0 * at(q + 1)) / 6.0;
    else
      du = (-2.0 * at(q - 1) - 3.0 * at(q) + 6.0 * at(q + 1) - at(q + 2)) / 6.0;
    out[q] = -v[q] * du / dth + f[q];
  }
}

struct ModeBlock {
  int mode = 0;
  std::vector<int> cols;
};

}  // namespace detail

/// Shared state for the Picard iteration: reflection solve, coefficient blocks and ray bookkeeping.
class ProfileSolver {
 public:
  ProfileSolver(const SystemSpec& s, const PhaseTable& t, const InteractionCoeffs& c, const BoundaryPulse& G,
                const GridSpec& g, const ProfileOptions& opt = {})
      : s_(s), t_(t), c_(c), G_(G), g_(g), opt_(opt), refl_(s, t) {
    if (g.ntheta < 8 || (g.ntheta & (g.ntheta - 1)) != 0)
      throw Error(ErrorKind::Configuration, "ntheta must be a power of two");
    if (g.nt < 2 || g.nx < 2) throw Error(ErrorKind::Configuration, "profile grid needs nt, nx >= 2");
    if (G.amplitude.size() != s.p) throw Error(ErrorKind::Configuration, "pulse amplitude must have p entries");
    gin_ = refl_.solve(G.amplitude);
    for (int m : t.incoming_set) {
      detail::ModeBlock b;
      b.mode = m;
      for (int k = 0; k < t.modes[m].nu; ++k) b.cols.push_back(t.column(m, k));
      blocks_.push_back(b);
    }
  }

  const GridSpec& grid() const { return g_; }

  ProfileSet empty_set() const {
    ProfileSet p;
    p.grid = g_;
    p.sigma.assign(static_cast<size_t>(s_.N), {});
    for (const auto& b : blocks_)
      for (int c : b.cols) p.sigma[static_cast<size_t>(c)].assign(g_.points(), 0.0);
    p.kappa = c_.kappa;
    p.omega = c_.omega;
    p.beta = t_.beta;
    return p;
  }

  /// Boundary value of column c at ray s.
  double boundary_value(int c, double s, double th) const {
    const auto& in = refl_.incoming_columns();
    for (size_t i = 0; i < in.size(); ++i)
      if (in[i] == c) return gin_(static_cast<Eigen::Index>(i)) * G_.scalar(s, th);
    return 0.0;
  }

  /// Advection speed B^m_{l,l}(W) for column l at node (is, ix), all theta.
  void speed(const ProfileSet& prev, const detail::ModeBlock& b, int l, int is, int ix, std::vector<double>& v) const {
    std::fill(v.begin(), v.end(), 0.0);
    for (int k : b.cols) {
      const double coef = c_.t(l, k, l);
      if (coef == 0.0) continue;
      const double* sp = prev.sigma[static_cast<size_t>(k)].data() + g_.index(is, ix, 0);
      for (int q = 0; q < g_.ntheta; ++q) v[q] += coef * sp[q];
    }
  }

  void source(const ProfileSet& prev, const detail::ModeBlock& b, int l, int is, int ix, std::vector<double>& f) const {
    std::fill(f.begin(), f.end(), 0.0);
    for (int k : b.cols) {
      const double coef = c_.e(l, k);
      if (coef == 0.0) continue;
      const double* sp = prev.sigma[static_cast<size_t>(k)].data() + g_.index(is, ix, 0);
      for (int q = 0; q < g_.ntheta; ++q) f[q] += coef * sp[q];
    }
  }

  /// One Picard step: transport with speed and source frozen at prev.
  ProfileSet step(const ProfileSet& prev) const {
    ProfileSet next = empty_set();
    const int nth = g_.ntheta;
    const double dx = g_.dx(), dth = g_.dtheta();
    double shock = 0.0;
    for (const auto& b : blocks_) {
      const int nu = static_cast<int>(b.cols.size());
      std::vector<double> ray_shock(static_cast<size_t>(g_.nt), 0.0);
      parallel_for(g_.nt, [&](int is) {
        const double s = is * g_.ds();
        std::vector<std::vector<double>> u(nu, std::vector<double>(nth)), v0(nu, std::vector<double>(nth)),
            v1(nu, std::vector<double>(nth)), f0(nu, std::vector<double>(nth)), f1(nu, std::vector<double>(nth));
        std::vector<double> vv(nth), ff(nth), k1(nth), u1(nth), u2(nth);
        for (int a = 0; a < nu; ++a) {
          for (int q = 0; q < nth; ++q) u[a][q] = boundary_value(b.cols[a], s, -g_.Theta + q * dth);
          std::copy(u[a].begin(), u[a].end(), next.sigma[b.cols[a]].begin() + static_cast<long>(g_.index(is, 0, 0)));
        }
        double sh = 0.0;
        for (int ix = 0; ix + 1 < g_.nx; ++ix) {
          double vmax = 0.0;
          for (int a = 0; a < nu; ++a) {
            speed(prev, b, b.cols[a], is, ix, v0[a]);
            speed(prev, b, b.cols[a], is, ix + 1, v1[a]);
            source(prev, b, b.cols[a], is, ix, f0[a]);
            source(prev, b, b.cols[a], is, ix + 1, f1[a]);
            for (int q = 0; q < nth; ++q) {
              vmax = std::max({vmax, std::abs(v0[a][q]), std::abs(v1[a][q])});
              const int qp = q + 1 == nth ? 0 : q + 1;
              sh = std::max(sh, std::abs(v0[a][qp] - v0[a][q]) / dth);
            }
          }
          int nsub = std::max(1, static_cast<int>(std::ceil(vmax * dx / (opt_.cfl * dth))));
          if (nsub > opt_.max_substeps)
            throw Error(ErrorKind::CflViolation, "profile march needs " + std::to_string(nsub) + " substeps");
          const double h = dx / nsub;
          for (int sub = 0; sub < nsub; ++sub) {
            for (int a = 0; a < nu; ++a) {
              auto coef = [&](double w) {
                for (int q = 0; q < nth; ++q) {
                  vv[q] = (1 - w) * v0[a][q] + w * v1[a][q];
                  ff[q] = (1 - w) * f0[a][q] + w * f1[a][q];
                }
              };
              const double w0 = double(sub) / nsub, w1 = double(sub + 1) / nsub, wh = (sub + 0.5) / nsub;
              if (opt_.scheme == ThetaScheme::Upwind1) {
                coef(w0);
                detail::upwind1_rhs(u[a], vv, ff, dth, k1);
                for (int q = 0; q < nth; ++q) u[a][q] += h * k1[q];
              } else {
                coef(w0);
                detail::upwind3_rhs(u[a], vv, ff, dth, k1);
                for (int q = 0; q < nth; ++q) u1[q] = u[a][q] + h * k1[q];
                coef(w1);
                detail::upwind3_rhs(u1, vv, ff, dth, k1);
                for (int q = 0; q < nth; ++q) u2[q] = 0.75 * u[a][q] + 0.25 * (u1[q] + h * k1[q]);
                coef(wh);
                detail::upwind3_rhs(u2, vv, ff, dth, k1);
                for (int q = 0; q < nth; ++q) u[a][q] = u[a][q] / 3.0 + 2.0 / 3.0 * (u2[q] + h * k1[q]);
              }
            }
          }
          for (int a = 0; a < nu; ++a)
            std::copy(u[a].begin(), u[a].end(),
                      next.sigma[b.cols[a]].begin() + static_cast<long>(g_.index(is, ix + 1, 0)));
        }
        ray_shock[static_cast<size_t>(is)] = sh;
      });
      for (double v : ray_shock) shock = std::max(shock, v);
    }
    next.max_shock_indicator = shock * g_.X;
    if (next.max_shock_indicator >= opt_.preshock_cap)
      throw Error(ErrorKind::PreShockHorizon,
                  "max|d_theta v| X = " + std::to_string(next.max_shock_indicator) + " exceeds the pre-shock cap");
    return next;
  }

  /// Sup-norm residual of the nonlinear profile equations by central differences at interior x nodes.
  double residual(const ProfileSet& p) const {
    const int nth = g_.ntheta;
    const double dx = g_.dx(), dth = g_.dtheta();
    double res = 0.0;
    std::vector<double> v(nth), f(nth);
    for (const auto& b : blocks_)
      for (int l : b.cols)
        for (int is = 0; is < g_.nt; ++is)
          for (int ix = 1; ix + 1 < g_.nx; ++ix) {
            speed(p, b, l, is, ix, v);
            source(p, b, l, is, ix, f);
            const double* um = p.sigma[l].data() + g_.index(is, ix - 1, 0);
            const double* u0 = p.sigma[l].data() + g_.index(is, ix, 0);
            const double* up = p.sigma[l].data() + g_.index(is, ix + 1, 0);
            for (int q = 0; q < nth; ++q) {
              const int qm = q == 0 ? nth - 1 : q - 1, qp = q + 1 == nth ? 0 : q + 1;
              const double r = (up[q] - um[q]) / (2 * dx) + v[q] * (u0[qp] - u0[qm]) / (2 * dth) - f[q];
              res = std::max(res, std::abs(r));
            }
          }
    return res;
  }

  ProfileSet solve() const {
    ProfileSet cur = empty_set();
    ProfileSet prev;
    int bad = 0;
    std::vector<double> diffs, ratios;
    for (int it = 1; it <= opt_.max_iter; ++it) {
      ProfileSet next = step(cur);
      double diff = 0.0;
      for (size_t c = 0; c < next.sigma.size(); ++c)
        for (size_t i = 0; i < next.sigma[c].size(); ++i)
          diff = std::max(diff, std::abs(next.sigma[c][i] - cur.sigma[c][i]));
      const double ratio = diffs.empty() || diffs.back() == 0.0 ? 0.0 : diff / diffs.back();
      diffs.push_back(diff);
      ratios.push_back(ratio);
      bad = ratios.size() > 1 && ratio >= 1.0 ? bad + 1 : 0;
      if (bad >= 3) throw Error(ErrorKind::NonContraction, "profile iteration does not contract; horizon too long, reduce T");
      const double shock = next.max_shock_indicator;
      prev = std::move(cur);
      cur = std::move(next);
      cur.max_shock_indicator = shock;
      if (diff < opt_.tol) break;
      if (it == opt_.max_iter) break;
    }
    cur.previous = std::move(prev.sigma);
    cur.iterations = static_cast<int>(diffs.size());
    cur.diffs = diffs;
    cur.ratios = ratios;
    cur.residual_sup = residual(cur);
    cur.residual_C = cur.residual_sup / (g_.dx() + g_.dtheta());
    return cur;
  }

 private:
  const SystemSpec& s_;
  const PhaseTable& t_;
  const InteractionCoeffs& c_;
  const BoundaryPulse& G_;
  GridSpec g_;
  ProfileOptions opt_;
  BoundaryReflection refl_;
  Vec gin_;
  std::vector<detail::ModeBlock> blocks_;
};

inline ProfileSet picard_step(const ProfileSet& prev, const SystemSpec& s, const PhaseTable& t,
                              const InteractionCoeffs& c, const BoundaryPulse& G, const ProfileOptions& opt = {}) {
  return ProfileSolver(s, t, c, G, prev.grid, opt).step(prev);
}

inline ProfileSet solve_profiles(const SystemSpec& s, const PhaseTable& t, const InteractionCoeffs& c,
                                 const BoundaryPulse& G, const GridSpec& grid, const ProfileOptions& opt = {}) {
  return ProfileSolver(s, t, c, G, grid, opt).solve();
}

/// Value of column c at ray coordinates (s, x) and phase theta; bilinear in (s, x), cubic in theta.
inline double profile_value(const ProfileSet& p, const std::vector<double>& data, double s, double x, double th) {
  const GridSpec& g = p.grid;
  if (x < -1e-12 * g.X || x > g.X * (1 + 1e-12)) throw Error(ErrorKind::Precondition, "x outside the profile grid");
  if (s < 0) return 0.0;
  if (s > g.T * (1 + 1e-12)) throw Error(ErrorKind::Precondition, "ray coordinate beyond the profile horizon");
  if (th < -g.Theta || th > g.Theta) return 0.0;
  const double fs = std::min(s / g.ds(), g.nt - 1.0), fx = std::min(std::max(x, 0.0) / g.dx(), g.nx - 1.0);
  const int is = std::min(static_cast<int>(fs), g.nt - 2), ix = std::min(static_cast<int>(fx), g.nx - 2);
  const double ws = fs - is, wx = fx - ix;
  const double xq = (th + g.Theta) / g.dtheta();
  const int q0 = static_cast<int>(std::floor(xq)) - 1;
  double w[4];
  lagrange_weights(3, xq - q0, w);
  auto node = [&](int a, int b) {
    const double* d = data.data() + g.index(a, b, 0);
    double v = 0.0;
    for (int j = 0; j < 4; ++j) v += w[j] * d[((q0 + j) % g.ntheta + g.ntheta) % g.ntheta];
    return v;
  };
  return (1 - ws) * ((1 - wx) * node(is, ix) + wx * node(is, ix + 1)) +
         ws * ((1 - wx) * node(is + 1, ix) + wx * node(is + 1, ix + 1));
}

/// u^a(t, y, x_d) = sum over incoming columns of sigma_c(x, phi_m / eps) r_c.
inline Vec leading_order_eval(const ProfileSet& p, const PhaseTable& t, double eps, double time, double xd,
                              const Vec& y = Vec()) {
  Vec u = Vec::Zero(t.R.rows());
  double phi0 = t.beta(0) * time;
  for (Eigen::Index j = 0; j < y.size(); ++j) phi0 += t.beta(j + 1) * y(j);
  for (int c = 0; c < p.N(); ++c) {
    if (!p.active(c)) continue;
    const double s = time - p.kappa(c) * xd;
    const double th = (phi0 + p.omega(c) * xd) / eps;
    const double v = profile_value(p, p.sigma[static_cast<size_t>(c)], s, xd, th);
    if (v != 0.0) u += v * t.R.col(c);
  }
  return u;
}

enum class NormVariant { Gamma, Lambda };

/// Grid function over slow axes (row-major, last slow axis fastest) times a periodic theta axis.
struct GridFunction {
  std::vector<int> dims;        // slow axis sizes
  std::vector<double> spacing;  // slow axis spacings
  int ntheta = 0;
  double Theta = 1.0;
  std::vector<double> data;

  size_t slow_points() const {
    size_t n = 1;
    for (int d : dims) n *= static_cast<size_t>(d);
    return n;
  }
};

namespace detail {

/// Fourth-order first derivative along axis (0..dims-1 slow, dims = theta).
inline std::vector<double> grid_derivative(const GridFunction& f, const std::vector<double>& u, int axis) {
  const int nslow = static_cast<int>(f.dims.size());
  std::vector<double> out(u.size(), 0.0);
  const size_t nth = static_cast<size_t>(f.ntheta);
  if (axis == nslow) {
    const double h = 2.0 * f.Theta / f.ntheta;
    const int n = f.ntheta;
    for (size_t base = 0; base < u.size(); base += nth)
      for (int q = 0; q < n; ++q) {
        auto at = [&](int k) { return u[base + static_cast<size_t>(((q + k) % n + n) % n)]; };
        out[base + q] = (at(-2) - 8 * at(-1) + 8 * at(1) - at(2)) / (12 * h);
      }
    return out;
  }
  size_t stride = nth;
  for (int a = nslow - 1; a > axis; --a) stride *= static_cast<size_t>(f.dims[a]);
  const int n = f.dims[axis];
  const double h = f.spacing[axis];
  if (n < 2) return out;
  const int width = std::min(5, n);
  std::vector<std::vector<double>> W(static_cast<size_t>(n));
  std::vector<int> start(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    int lo = std::max(0, std::min(i - width / 2, n - width));
    start[i] = lo;
    std::vector<int> offs;
    for (int k = 0; k < width; ++k) offs.push_back(lo + k - i);
    W[i] = derivative_weights(offs);
  }
  const size_t block = stride * static_cast<size_t>(n);
  for (size_t outer = 0; outer < u.size(); outer += block)
    for (int i = 0; i < n; ++i)
      for (size_t inner = 0; inner < stride; ++inner) {
        double v = 0.0;
        for (int k = 0; k < width; ++k) v += W[i][k] * u[outer + static_cast<size_t>(start[i] + k) * stride + inner];
        out[outer + static_cast<size_t>(i) * stride + inner] = v / h;
      }
  return out;
}

inline double grid_l2(const GridFunction& f, const std::vector<double>& u) {
  double cell = 2.0 * f.Theta / f.ntheta;
  for (size_t a = 0; a < f.dims.size(); ++a) cell *= f.dims[a] > 1 ? f.spacing[a] : 1.0;
  double s = 0.0;
  for (double v : u) s += v * v;
  return std::sqrt(s * cell);
}

inline std::vector<double> theta_weighted(const GridFunction& f, const std::vector<double>& u, int power) {
  std::vector<double> out(u);
  const double h = 2.0 * f.Theta / f.ntheta;
  for (size_t i = 0; i < out.size(); ++i) {
    const double th = -f.Theta + static_cast<double>(i % static_cast<size_t>(f.ntheta)) * h;
    out[i] *= std::pow(th, power);
  }
  return out;
}

}  // namespace detail

/// Discrete Gamma^s norm (sum over all mixed theta-weights and derivatives of order <= s) or the
/// Lambda^s norm (pure powers only, zero order counted once).
inline double weighted_norm(const GridFunction& f, int s, NormVariant variant) {
  const int nslow = static_cast<int>(f.dims.size());
  const int nvars = nslow + 2;  // theta weight, slow derivatives, theta derivative
  double total = 0.0;
  // Enumerate multi-indices beta in N^nvars with |beta| <= s; Lambda keeps the pure ones, so its
  // terms are a subset of the Gamma terms summed in the same order.
  std::vector<int> beta(static_cast<size_t>(nvars), 0);
  std::function<void(int, int)> rec = [&](int var, int left) {
    if (var == nvars) {
      int nonzero = 0;
      for (int b : beta) nonzero += b > 0;
      if (variant == NormVariant::Lambda && nonzero > 1) return;
      std::vector<double> u = f.data;
      for (int a = 1; a < nvars; ++a)
        for (int k = 0; k < beta[a]; ++k) u = detail::grid_derivative(f, u, a - 1);
      if (beta[0] > 0) u = detail::theta_weighted(f, u, beta[0]);
      total += detail::grid_l2(f, u);
      return;
    }
    for (int b = 0; b <= left; ++b) {
      beta[static_cast<size_t>(var)] = b;
      rec(var + 1, left - b);
    }
    beta[static_cast<size_t>(var)] = 0;
  };
  rec(0, s);
  return total;
}

/// Profile column c as a grid function over (s, x) slow axes.
inline GridFunction profile_grid_function(const ProfileSet& p, int c) {
  GridFunction f;
  f.dims = {p.grid.nt, p.grid.nx};
  f.spacing = {p.grid.ds(), p.grid.dx()};
  f.ntheta = p.grid.ntheta;
  f.Theta = p.grid.Theta;
  f.data = p.sigma[static_cast<size_t>(c)];
  return f;
}

inline json grid_to_json(const GridSpec& g) {
  return json{{"T", g.T}, {"X", g.X}, {"Theta", g.Theta}, {"nt", g.nt}, {"nx", g.nx}, {"ntheta", g.ntheta}};
}

inline GridSpec grid_from_json(const json& j, GridSpec g = {}) {
  g.T = j.value("T", g.T);
  g.X = j.value("X", g.X);
  g.Theta = j.value("Theta", g.Theta);
  g.nt = j.value("nt", g.nt);
  g.nx = j.value("nx", g.nx);
  g.ntheta = j.value("ntheta", g.ntheta);
  if (!(g.T > 0 && g.X > 0 && g.Theta > 0)) throw Error(ErrorKind::Configuration, "profile grid extents must be positive");
  return g;
}

/// Binary container: magic, uint64 header length, JSON header, then float64 data of the active columns.
inline void save_profiles(const std::string& path, const ProfileSet& p) {
  json h;
  h["grid"] = grid_to_json(p.grid);
  std::vector<int> cols;
  for (int c = 0; c < p.N(); ++c)
    if (p.active(c)) cols.push_back(c);
  h["columns"] = cols;
  h["N"] = p.N();
  h["kappa"] = std::vector<double>(p.kappa.data(), p.kappa.data() + p.kappa.size());
  h["omega"] = std::vector<double>(p.omega.data(), p.omega.data() + p.omega.size());
  h["beta"] = std::vector<double>(p.beta.data(), p.beta.data() + p.beta.size());
  h["iterations"] = p.iterations;
  h["residual_sup"] = p.residual_sup;
  const std::string hs = h.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path);
  out.write("POPROF01", 8);
  const std::uint64_t len = hs.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (int c : cols)
    out.write(reinterpret_cast<const char*>(p.sigma[static_cast<size_t>(c)].data()),
              static_cast<std::streamsize>(p.sigma[static_cast<size_t>(c)].size() * sizeof(double)));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path);
}

inline ProfileSet load_profiles(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "POPROF01") throw Error(ErrorKind::Io, "not a profile container: " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string hs(len, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(len));
  const json h = json::parse(hs);
  ProfileSet p;
  p.grid = grid_from_json(h.at("grid"));
  const int N = h.at("N").get<int>();
  p.sigma.assign(static_cast<size_t>(N), {});
  auto vec = [](const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Vec(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  p.kappa = vec(h.at("kappa"));
  p.omega = vec(h.at("omega"));
  p.beta = vec(h.at("beta"));
  p.iterations = h.value("iterations", 0);
  p.residual_sup = h.value("residual_sup", 0.0);
  for (int c : h.at("columns").get<std::vector<int>>()) {
    auto& d = p.sigma[static_cast<size_t>(c)];
    d.resize(p.grid.points());
    in.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  if (!in) throw Error(ErrorKind::Io, "truncated profile container: " + path);
  return p;
}

inline void write_convergence_csv(const std::string& path, const ProfileSet& p) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path);
  out << "iter,diff_sup,ratio\n";
  out.precision(17);
  for (size_t i = 0; i < p.diffs.size(); ++i) out << i + 1 << ',' << p.diffs[i] << ',' << p.ratios[i] << '\n';
}

}  // namespace pulse_optics
