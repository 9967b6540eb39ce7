#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"
#include "system.hpp"

namespace pulse_optics {

struct ValidationItem {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  bool pass() const {
    return std::all_of(items.begin(), items.end(), [](const ValidationItem& i) { return i.pass; });
  }
  const ValidationItem* find(const std::string& name) const {
    for (const auto& i : items)
      if (i.name == name) return &i;
    return nullptr;
  }
};

struct FrequencyPoint {
  double tau = 0.0;
  double gamma = 0.0;
  Vec eta;  // length d-1
};

struct PhaseMode {
  int index = 0;
  double omega = 0.0;
  int nu = 1;
  Mat r;  // N x nu, unit columns
  Mat l;  // nu x N, l r = I across the whole table
  Vec group_velocity;
  bool incoming = false;
  double kappa = 0.0;  // -d omega / d tau
  int pivot = 0;
};

struct PhaseTable {
  Vec beta;  // (tau_bar, eta_bar)
  std::vector<PhaseMode> modes;
  std::vector<Mat> projectors;
  std::vector<int> incoming_set;
  std::vector<int> outgoing_set;
  Mat R;  // all r vectors as columns, mode by mode
  Mat L;  // inverse of R

  int M() const { return static_cast<int>(modes.size()); }
  /// Column of R holding r_{m,k}.
  int column(int m, int k) const {
    int c = 0;
    for (int i = 0; i < m; ++i) c += modes[i].nu;
    return c + k;
  }
};

struct DispersionRoot {
  double omega = 0.0;
  int nu = 1;
  Mat basis;
  int pivot = 0;
};

struct StabilityScanOptions {
  int density = 64;
  double threshold = 1e-6;
  double glancing_tol = 1e-6;
};

struct StabilityScanResult {
  double min_sigma = INFINITY;
  FrequencyPoint argmin;
  int evaluated = 0;
  int skipped = 0;
  std::vector<std::string> warnings;
  bool uniformly_stable = false;
};

namespace detail {

inline double spec_scale(const SystemSpec& s) {
  double sc = 1.0;
  for (const auto& a : s.A) sc = std::max(sc, a.norm());
  return sc;
}

/// tau I + sum_{j<d} eta_j A_j
inline Mat tangential_symbol(const SystemSpec& s, double tau, const Vec& eta) {
  Mat M = tau * Mat::Identity(s.N, s.N);
  for (int j = 0; j + 1 < s.d; ++j) M += eta(j) * s.A[j];
  return M;
}

inline Vec beta_eta(const Vec& beta) { return beta.tail(beta.size() - 1); }

inline Mat spatial_symbol(const SystemSpec& s, const Vec& xi) {
  Mat M = Mat::Zero(s.N, s.N);
  for (int j = 0; j < s.d; ++j) M += xi(j) * s.A[j];
  return M;
}

inline std::vector<double> real_eigenvalues(const Mat& M) {
  Eigen::EigenSolver<Mat> es(M, false);
  std::vector<double> out;
  for (Eigen::Index i = 0; i < M.rows(); ++i) out.push_back(es.eigenvalues()(i).real());
  std::sort(out.begin(), out.end());
  return out;
}

/// Points on the unit sphere of R^n from a product grid in hyperspherical angles.
inline std::vector<Vec> sphere_samples(int n, int density) {
  std::vector<Vec> out;
  if (n == 1) {
    out.push_back(Vec::Constant(1, 1.0));
    out.push_back(Vec::Constant(1, -1.0));
    return out;
  }
  const int nang = n - 1;
  std::vector<int> idx(nang, 0);
  while (true) {
    Vec x(n);
    double sprod = 1.0;
    for (int a = 0; a < nang; ++a) {
      const bool last = a == nang - 1;
      const double ang = last ? 2.0 * M_PI * idx[a] / density : M_PI * idx[a] / std::max(1, density - 1);
      x(a) = sprod * std::cos(ang);
      sprod *= std::sin(ang);
    }
    x(n - 1) = sprod;
    out.push_back(x);
    int a = 0;
    while (a < nang && ++idx[a] == density) idx[a++] = 0;
    if (a == nang) break;
  }
  return out;
}

}  // namespace detail

inline ValidationReport validate_system(const SystemSpec& s, int directions = 32) {
  if (static_cast<int>(s.A.size()) != s.d) throw Error(ErrorKind::Structural, "need d coefficient matrices");
  for (const auto& a : s.A)
    if (a.rows() != s.N || a.cols() != s.N) throw Error(ErrorKind::Structural, "A_j(0) must be square N x N");
  if (s.F0.rows() != s.N || s.F0.cols() != s.N) throw Error(ErrorKind::Structural, "F0 must be square N x N");
  if (s.B0.cols() != s.N) throw Error(ErrorKind::Structural, "B0 must have N columns");
  if (s.p <= 0 || s.p >= s.N || s.B0.rows() != s.p) throw Error(ErrorKind::Structural, "need 0 < p < N rows in B0");

  ValidationReport rep;
  Eigen::JacobiSVD<Mat> svd(s.Ad());
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  rep.items.push_back({"noncharacteristic", smin > 1e-12 * std::max(1.0, smax), smin,
                       "min singular value of A_d(0)"});

  Eigen::JacobiSVD<Mat> bsvd(s.B0);
  const auto& bs = bsvd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < bs.size(); ++i)
    if (bs(i) > 1e-12 * std::max(1.0, bs(0))) ++rank;
  rep.items.push_back({"boundary_rank", rank == s.p, static_cast<double>(rank), "rank of B(0)"});

  int positive = 0;
  for (double v : detail::real_eigenvalues(s.Ad()))
    if (v > 0) ++positive;
  rep.items.push_back({"boundary_count", positive == s.p, static_cast<double>(positive),
                       "positive eigenvalues of A_d(0)"});

  double max_imag = 0.0;
  double max_cond = 1.0;
  for (const Vec& xi : detail::sphere_samples(s.d, directions)) {
    Eigen::EigenSolver<Mat> es(detail::spatial_symbol(s, xi));
    for (Eigen::Index i = 0; i < s.N; ++i) max_imag = std::max(max_imag, std::abs(es.eigenvalues()(i).imag()));
    max_cond = std::max(max_cond, condition_number(es.eigenvectors()));
  }
  const double sc = detail::spec_scale(s);
  rep.items.push_back({"real_spectrum", max_imag < 1e-10 * sc, max_imag,
                       "max |Im lambda| over sampled directions"});
  rep.items.push_back({"semisimple", std::isfinite(max_cond) && max_cond < 1e8, max_cond,
                       "max eigenvector condition number over sampled directions"});
  return rep;
}

/// Roots of det[tau I + sum eta_j A_j + omega A_d] = 0 in canonical order: by the leading pivot of
/// the deterministic eigenspace basis, ties broken by omega.
inline std::vector<DispersionRoot> dispersion_roots(const SystemSpec& s, const Vec& beta) {
  if (beta.size() != s.d) throw Error(ErrorKind::Precondition, "beta must have d entries");
  if (beta.norm() == 0.0) throw Error(ErrorKind::Precondition, "beta must be nonzero");
  const Mat L0 = detail::tangential_symbol(s, beta(0), detail::beta_eta(beta));
  const Mat K = -s.Ad().fullPivLu().solve(L0);
  Eigen::EigenSolver<Mat> es(K, false);
  const double scale = std::max(1.0, K.norm());
  std::vector<double> w;
  for (Eigen::Index i = 0; i < s.N; ++i) {
    if (std::abs(es.eigenvalues()(i).imag()) > 1e-8 * scale)
      throw Error(ErrorKind::OutsideHyperbolicRegion, "beta outside hyperbolic region: complex root");
    w.push_back(es.eigenvalues()(i).real());
  }
  std::sort(w.begin(), w.end());

  std::vector<DispersionRoot> roots;
  for (size_t i = 0; i < w.size();) {
    size_t j = i + 1;
    while (j < w.size() && w[j] - w[j - 1] < 1e-7 * scale) ++j;
    double mean = 0.0;
    for (size_t k = i; k < j; ++k) mean += w[k];
    DispersionRoot r;
    r.omega = mean / static_cast<double>(j - i);
    r.nu = static_cast<int>(j - i);
    roots.push_back(r);
    i = j;
  }
  for (auto& r : roots) {
    const Mat Lm = L0 + r.omega * s.Ad();
    Eigen::JacobiSVD<Mat> svd(Lm, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(s.N - r.nu) > 1e-6 * std::max(1.0, sv(0)))
      throw Error(ErrorKind::Assumption, "eigenvalue not semisimple at root " + std::to_string(r.omega));
    const Mat Z = svd.matrixV().rightCols(r.nu);
    auto db = deterministic_basis(Z);
    r.basis = db.basis;
    r.pivot = db.pivot;
  }
  std::sort(roots.begin(), roots.end(), [](const DispersionRoot& a, const DispersionRoot& b) {
    if (a.pivot != b.pivot) return a.pivot < b.pivot;
    return a.omega < b.omega;
  });
  return roots;
}

/// Gradient of the eigenvalue branch of sum xi_j A_j through -tau_bar at xi* = (eta_bar, omega).
inline Vec group_velocity(const SystemSpec& s, const Vec& beta, double omega, int nu) {
  Vec xi(s.d);
  for (int j = 0; j + 1 < s.d; ++j) xi(j) = beta(j + 1);
  xi(s.d - 1) = omega;
  const double target = -beta(0);
  const double h = 1e-5 * std::max(1.0, xi.norm());
  auto branch = [&](const Vec& x) {
    std::vector<double> ev = detail::real_eigenvalues(detail::spatial_symbol(s, x));
    std::sort(ev.begin(), ev.end(),
              [&](double a, double b) { return std::abs(a - target) < std::abs(b - target); });
    if (static_cast<int>(ev.size()) > nu) {
      const double in = std::abs(ev[nu - 1] - target);
      const double out = std::abs(ev[nu] - target);
      if (out <= 10.0 * in + 1e-9)
        throw Error(ErrorKind::BranchTracking, "eigenvalue branches cross inside the difference stencil");
    }
    double m = 0.0;
    for (int k = 0; k < nu; ++k) m += ev[k];
    return m / nu;
  };
  Vec v(s.d);
  for (int j = 0; j < s.d; ++j) {
    Vec xp = xi, xm = xi;
    xp(j) += h;
    xm(j) -= h;
    v(j) = (branch(xp) - branch(xm)) / (2.0 * h);
  }
  return v;
}

inline PhaseTable phase_table(const SystemSpec& s, const Vec& beta) {
  const auto roots = dispersion_roots(s, beta);
  PhaseTable t;
  t.beta = beta;
  t.R.resize(s.N, s.N);
  int col = 0;
  for (size_t m = 0; m < roots.size(); ++m) {
    PhaseMode md;
    md.index = static_cast<int>(m);
    md.omega = roots[m].omega;
    md.nu = roots[m].nu;
    md.r = roots[m].basis;
    md.pivot = roots[m].pivot;
    md.group_velocity = group_velocity(s, beta, md.omega, md.nu);
    const double vd = md.group_velocity(s.d - 1);
    if (std::abs(vd) < 1e-8)
      throw Error(ErrorKind::Assumption, "vanishing normal group velocity (glancing mode)");
    md.incoming = vd > 0;
    t.R.middleCols(col, md.nu) = md.r;
    col += md.nu;
    t.modes.push_back(md);
  }
  if (col != s.N) throw Error(ErrorKind::Assumption, "eigenspace dimensions do not sum to N");
  t.L = t.R.inverse();
  const Mat Adinv = s.Ad().inverse();
  col = 0;
  for (auto& md : t.modes) {
    md.l = t.L.middleRows(col, md.nu);
    md.kappa = (md.l.row(0) * Adinv * md.r.col(0))(0);
    t.projectors.push_back(md.r * md.l);
    (md.incoming ? t.incoming_set : t.outgoing_set).push_back(md.index);
    col += md.nu;
  }
  return t;
}

/// Rescales every r_{m,k} by c and every l_{m,k} by 1/c.
inline PhaseTable rescale_basis(PhaseTable t, double c) {
  for (auto& m : t.modes) {
    m.r *= c;
    m.l /= c;
  }
  t.R *= c;
  t.L /= c;
  return t;
}

struct HyperbolicTest {
  bool hyperbolic = false;
  double max_real = 0.0;
  double eigvec_cond = 0.0;
};

inline HyperbolicTest hyperbolic_region_test(const SystemSpec& s, double tau, const Vec& eta) {
  if (tau == 0.0 && (eta.size() == 0 || eta.norm() == 0.0))
    throw Error(ErrorKind::Precondition, "(tau, eta) must be nonzero");
  const Mat K = s.Ad().fullPivLu().solve(detail::tangential_symbol(s, tau, eta));
  // calA = -i K: purely imaginary spectrum iff K has real spectrum.
  Eigen::EigenSolver<Mat> es(K);
  HyperbolicTest h;
  for (Eigen::Index i = 0; i < s.N; ++i) h.max_real = std::max(h.max_real, std::abs(es.eigenvalues()(i).imag()));
  h.eigvec_cond = condition_number(es.eigenvectors());
  h.hyperbolic = h.max_real < 1e-10 * std::max(1.0, K.norm()) && h.eigvec_cond < 1e8;
  return h;
}

inline bool glancing_test(const SystemSpec& s, double tau, const Vec& eta, double tol = 1e-6) {
  if (tau == 0.0 && (eta.size() == 0 || eta.norm() == 0.0))
    throw Error(ErrorKind::Precondition, "(tau, eta) must be nonzero");
  const double sc = detail::spec_scale(s);
  Mat tang = Mat::Zero(s.N, s.N);
  for (int j = 0; j + 1 < s.d; ++j) tang += eta(j) * s.A[j];
  const double adinv = s.Ad().fullPivLu().inverse().norm();
  const double xmax = 2.0 * (std::abs(tau) + tang.norm()) * adinv + 1.0;
  auto lam = [&](double xd, int k) {
    return detail::real_eigenvalues(tang + xd * s.Ad())[static_cast<size_t>(k)];
  };
  const int ns = 2001;
  const double dxs = 2.0 * xmax / (ns - 1);
  const double reach = 2.0 * dxs * s.Ad().norm() + 1e-8 * sc;
  for (int k = 0; k < s.N; ++k) {
    std::vector<double> f(ns);
    for (int i = 0; i < ns; ++i) f[i] = std::abs(tau + lam(-xmax + i * dxs, k));
    for (int i = 1; i + 1 < ns; ++i) {
      if (!(f[i] <= f[i - 1] && f[i] <= f[i + 1]) || f[i] > reach) continue;
      if (i > 1 && f[i] == f[i - 1]) continue;
      double a = -xmax + (i - 1) * dxs, b = -xmax + (i + 1) * dxs;
      const double g = 0.5 * (std::sqrt(5.0) - 1.0);
      for (int it = 0; it < 80; ++it) {
        const double c = b - g * (b - a), e = a + g * (b - a);
        if (std::abs(tau + lam(c, k)) < std::abs(tau + lam(e, k))) b = e; else a = c;
      }
      const double x0 = 0.5 * (a + b);
      if (std::abs(tau + lam(x0, k)) > 1e-8 * sc) continue;
      const double h = 1e-6 * std::max(1.0, std::abs(x0));
      const double slope = (lam(x0 + h, k) - lam(x0 - h, k)) / (2.0 * h);
      if (std::abs(slope) < tol * sc) return true;
    }
  }
  return false;
}

/// -i A_d^{-1}((tau - i gamma) I + sum eta_j A_j)
inline CMat calA(const SystemSpec& s, const FrequencyPoint& z) {
  CMat M = cplx(z.tau, -z.gamma) * CMat::Identity(s.N, s.N);
  for (int j = 0; j + 1 < s.d; ++j) M += z.eta(j) * s.A[j].cast<cplx>();
  const CMat Adinv = s.Ad().inverse().cast<cplx>();
  return cplx(0.0, -1.0) * Adinv * M;
}

namespace detail {

/// Spectral projector onto the eigenvalues with negative real part, via the scaled Newton sign iteration.
inline CMat stable_projector(const CMat& A) {
  const Eigen::Index n = A.rows();
  CMat X = A;
  for (int it = 0; it < 100; ++it) {
    Eigen::PartialPivLU<CMat> lu(X);
    const double c = std::pow(std::abs(lu.determinant()), -1.0 / static_cast<double>(n));
    const double cs = std::isfinite(c) && c > 0 ? c : 1.0;
    CMat Xn = 0.5 * (cs * X + lu.inverse() / cs);
    const double diff = (Xn - X).norm();
    X = Xn;
    if (diff < 1e-14 * X.norm()) break;
  }
  return 0.5 * (CMat::Identity(n, n) - X);
}

inline CMat stable_basis_unchecked(const SystemSpec& s, const FrequencyPoint& z) {
  const CMat A = calA(s, z);
  Eigen::ComplexEigenSolver<CMat> es(A, false);
  const double scale = std::max(1.0, A.norm());
  int nstable = 0;
  for (Eigen::Index i = 0; i < s.N; ++i) {
    const double re = es.eigenvalues()(i).real();
    if (std::abs(re) < 1e-12 * scale) throw Error(ErrorKind::NearImaginaryEigenvalue, "eigenvalue on the imaginary axis");
    if (re < 0) ++nstable;
  }
  if (nstable != s.p)
    throw Error(ErrorKind::DimensionMismatch,
                "stable subspace has dimension " + std::to_string(nstable) + ", expected " + std::to_string(s.p));
  const CMat P = stable_projector(A);
  Eigen::ColPivHouseholderQR<CMat> qr(P);
  CMat Q = qr.householderQ() * CMat::Identity(s.N, nstable);
  return Q;
}

}  // namespace detail

inline CMat stable_subspace(const SystemSpec& s, const FrequencyPoint& z) {
  if (!(z.gamma > 0)) throw Error(ErrorKind::Precondition, "stable_subspace needs gamma > 0");
  return detail::stable_basis_unchecked(s, z);
}

inline StabilityScanResult uniform_stability_scan(const SystemSpec& s, const StabilityScanOptions& opt = {}) {
  StabilityScanResult res;
  const int nang = s.d;
  const int n = std::max(2, opt.density);
  std::vector<int> idx(nang, 0);
  const CMat B = s.B0.cast<cplx>();
  while (true) {
    Vec x(nang + 1);
    double sprod = 1.0;
    for (int a = 0; a < nang; ++a) {
      const double ang = M_PI * idx[a] / (n - 1);
      x(a) = sprod * std::cos(ang);
      sprod *= std::sin(ang);
    }
    x(nang) = sprod;
    FrequencyPoint z;
    z.tau = x(0);
    z.eta = x.segment(1, nang - 1);
    z.gamma = std::max(0.0, x(nang));
    if (z.gamma < 1e-14) z.gamma = 0.0;

    CMat E;
    std::string skip;
    try {
      if (z.gamma > 0) {
        E = detail::stable_basis_unchecked(s, z);
      } else if (glancing_test(s, z.tau, z.eta, opt.glancing_tol)) {
        skip = "glancing point";
      } else if (hyperbolic_region_test(s, z.tau, z.eta).hyperbolic) {
        Vec beta(s.d);
        beta(0) = z.tau;
        beta.tail(s.d - 1) = z.eta;
        const PhaseTable t = phase_table(s, beta);
        Mat Rin(s.N, 0);
        for (int m : t.incoming_set) {
          Rin.conservativeResize(Eigen::NoChange, Rin.cols() + t.modes[m].nu);
          Rin.rightCols(t.modes[m].nu) = t.modes[m].r;
        }
        if (Rin.cols() != s.p) throw Error(ErrorKind::DimensionMismatch, "incoming modes do not span p dimensions");
        Eigen::HouseholderQR<CMat> qr(Rin.cast<cplx>());
        E = qr.householderQ() * CMat::Identity(s.N, s.p);
      } else {
        E = detail::stable_basis_unchecked(s, z);
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NearImaginaryEigenvalue || e.kind() == ErrorKind::BranchTracking ||
          e.kind() == ErrorKind::Assumption)
        skip = e.what();
      else
        throw;
    }
    if (!skip.empty()) {
      ++res.skipped;
      res.warnings.push_back("skipped (tau=" + std::to_string(z.tau) + ", gamma=" + std::to_string(z.gamma) +
                             "): " + skip);
    } else {
      const double sv = min_singular_value(CMat(B * E));
      ++res.evaluated;
      if (sv < res.min_sigma) {
        res.min_sigma = sv;
        res.argmin = z;
      }
    }
    int a = 0;
    while (a < nang && ++idx[a] == n) idx[a++] = 0;
    if (a == nang) break;
  }
  res.uniformly_stable = res.evaluated > 0 && res.min_sigma > opt.threshold;
  return res;
}

/// Largest principal angle between the column spaces of two complex bases.
inline double principal_angle(const CMat& X, const CMat& Y) {
  Eigen::HouseholderQR<CMat> qx(X), qy(Y);
  const CMat Qx = qx.householderQ() * CMat::Identity(X.rows(), X.cols());
  const CMat Qy = qy.householderQ() * CMat::Identity(Y.rows(), Y.cols());
  Eigen::JacobiSVD<CMat> svd(Qx.adjoint() * Qy);
  const double c = std::min(1.0, svd.singularValues().minCoeff());
  return std::acos(c);
}

}  // namespace pulse_optics
