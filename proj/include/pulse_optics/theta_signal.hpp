#pragma once

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"

namespace pulse_optics {

enum class CutoffKernel { Smoothstep5, SmoothExp };

namespace detail {

inline Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> fft;
  return fft;
}

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline double smooth_exp_step(double x) {
  if (x <= 0) return 0.0;
  if (x >= 1) return 1.0;
  const double a = std::exp(-1.0 / x), b = std::exp(-1.0 / (1.0 - x));
  return a / (a + b);
}

inline double smoothstep5(double x) {
  if (x <= 0) return 0.0;
  if (x >= 1) return 1.0;
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

}  // namespace detail

/// phi(r): 1 on r <= 1, 0 on r >= 2.
inline double cutoff_phi(double r, CutoffKernel k = CutoffKernel::Smoothstep5) {
  const double x = r - 1.0;
  return 1.0 - (k == CutoffKernel::Smoothstep5 ? detail::smoothstep5(x) : detail::smooth_exp_step(x));
}

/// chi_p(m) = 1 - phi(|m| / p).
inline double cutoff_chi(double m, double p, CutoffKernel k = CutoffKernel::Smoothstep5) {
  if (m == 0.0) return 0.0;
  return 1.0 - cutoff_phi(std::abs(m) / p, k);
}

/// Uniform samples of a scalar function of theta on [-Theta, Theta), with its DFT.
class ThetaSignal {
 public:
  ThetaSignal() = default;

  ThetaSignal(double Theta, std::vector<double> samples) : Theta_(Theta), f_(std::move(samples)) {
    if (!detail::is_pow2(static_cast<int>(f_.size())))
      throw Error(ErrorKind::Precondition, "theta sample count must be a power of two");
    if (!(Theta_ > 0)) throw Error(ErrorKind::Precondition, "Theta must be positive");
    detail::fft_engine().fwd(F_, f_);
  }

  static ThetaSignal from_function(double Theta, int n, const std::function<double(double)>& g) {
    std::vector<double> v(static_cast<size_t>(n));
    const double h = 2.0 * Theta / n;
    for (int q = 0; q < n; ++q) v[static_cast<size_t>(q)] = g(-Theta + q * h);
    return ThetaSignal(Theta, std::move(v));
  }

  static ThetaSignal zeros(double Theta, int n) { return ThetaSignal(Theta, std::vector<double>(static_cast<size_t>(n), 0.0)); }

  /// Keeps F as the spectrum (so exact zeros survive); F must be Hermitian.
  static ThetaSignal from_spectrum(double Theta, std::vector<cplx> F) {
    ThetaSignal s;
    s.Theta_ = Theta;
    detail::fft_engine().inv(s.f_, F);
    s.F_ = std::move(F);
    return s;
  }

  int size() const { return static_cast<int>(f_.size()); }
  double Theta() const { return Theta_; }
  double dtheta() const { return 2.0 * Theta_ / size(); }
  double theta(int q) const { return -Theta_ + q * dtheta(); }
  const std::vector<double>& samples() const { return f_; }
  const std::vector<cplx>& spectrum() const { return F_; }

  /// Angular frequency of DFT bin k.
  double frequency(int k) const {
    const int n = size();
    const int kk = k < n / 2 ? k : k - n;
    return M_PI * kk / Theta_;
  }

  ThetaSignal multiply_spectrum(const std::function<cplx(double, int)>& g) const {
    std::vector<cplx> G(F_.size());
    for (int k = 0; k < size(); ++k) G[k] = g(frequency(k), k) * F_[k];
    return from_spectrum(Theta_, G);
  }

  /// Periodic Lagrange interpolation (order 3 or 5); zero outside [-Theta, Theta].
  double operator()(double th, int order = 3) const {
    if (th < -Theta_ || th > Theta_) return 0.0;
    const int n = size();
    const double x = (th + Theta_) / dtheta();
    const int q = static_cast<int>(std::floor(x));
    const int lo = q - (order - 1) / 2;
    double w[8];
    lagrange_weights(order, x - lo, w);
    double s = 0.0;
    for (int j = 0; j <= order; ++j) s += w[j] * f_[static_cast<size_t>(((lo + j) % n + n) % n)];
    return s;
  }

  double integral() const {
    double s = 0.0, c = 0.0;
    for (double v : f_) {
      const double y = v - c;
      const double t = s + y;
      c = (t - s) - y;
      s = t;
    }
    return s * dtheta();
  }
  double l1() const {
    double s = 0.0;
    for (double v : f_) s += std::abs(v);
    return s * dtheta();
  }
  double l2() const {
    double s = 0.0;
    for (double v : f_) s += v * v;
    return std::sqrt(s * dtheta());
  }
  double sup() const {
    double s = 0.0;
    for (double v : f_) s = std::max(s, std::abs(v));
    return s;
  }
  double endpoint_magnitude() const { return std::max(std::abs(f_.front()), std::abs(f_.back())); }

  /// Spectral H^s norm, (sum (1+m^2)^s |f^(m)|^2)^{1/2} with Parseval scaling.
  double hs_norm(double s) const {
    double acc = 0.0;
    for (int k = 0; k < size(); ++k) acc += std::pow(1.0 + frequency(k) * frequency(k), s) * std::norm(F_[k]);
    return std::sqrt(acc * dtheta() / size());
  }

  ThetaSignal operator+(const ThetaSignal& o) const { return combine(o, 1.0); }
  ThetaSignal operator-(const ThetaSignal& o) const { return combine(o, -1.0); }
  ThetaSignal operator*(double a) const {
    std::vector<double> v(f_);
    for (double& x : v) x *= a;
    return ThetaSignal(Theta_, std::move(v));
  }

 private:
  ThetaSignal combine(const ThetaSignal& o, double sign) const {
    check_same(o);
    std::vector<double> v(f_);
    for (size_t i = 0; i < v.size(); ++i) v[i] += sign * o.f_[i];
    return ThetaSignal(Theta_, std::move(v));
  }
  void check_same(const ThetaSignal& o) const {
    if (o.size() != size() || o.Theta_ != Theta_) throw Error(ErrorKind::Precondition, "signals on different grids");
  }

  double Theta_ = 1.0;
  std::vector<double> f_;
  std::vector<cplx> F_;

  friend ThetaSignal product(const ThetaSignal& a, const ThetaSignal& b);
};

inline ThetaSignal product(const ThetaSignal& a, const ThetaSignal& b) {
  a.check_same(b);
  std::vector<double> v(a.f_);
  for (size_t i = 0; i < v.size(); ++i) v[i] *= b.f_[i];
  return ThetaSignal(a.Theta_, std::move(v));
}

/// sigma_p: Fourier multiplier chi_p, exact zero at m = 0.
inline ThetaSignal moment_zero(const ThetaSignal& s, double p, CutoffKernel k = CutoffKernel::Smoothstep5) {
  if (!(p > 0 && p < 1)) throw Error(ErrorKind::Precondition, "cutoff parameter p must lie in (0,1)");
  return s.multiply_spectrum([&](double m, int) { return cplx(cutoff_chi(m, p, k), 0.0); });
}

inline ThetaSignal theta_derivative(const ThetaSignal& s) {
  const int nyq = s.size() / 2;
  return s.multiply_spectrum([&](double m, int idx) { return idx == nyq ? cplx(0.0) : cplx(0.0, m); });
}

/// Decaying primitive of a zero-mean signal: spectrum divided by i m, with the constant fixed so that
/// the primitive vanishes at the ends of the window.
inline ThetaSignal decaying_primitive(const ThetaSignal& s) {
  if (std::abs(s.spectrum()[0]) * s.dtheta() > 1e-12 * std::max(s.l1(), 1e-300))
    throw Error(ErrorKind::Contract, "decaying primitive needs a zero-mean signal");
  const int n = s.size(), nyq = n / 2;
  std::vector<cplx> G(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) G[k] = (k == 0 || k == nyq) ? cplx(0.0) : s.spectrum()[k] * cplx(0.0, -1.0 / s.frequency(k));
  std::vector<double> tmp;
  detail::fft_engine().inv(tmp, G);
  G[0] = cplx(-tmp[0] * n, 0.0);  // shift so the sample at theta = -Theta is zero
  return ThetaSignal::from_spectrum(s.Theta(), std::move(G));
}

/// (sigma * tau_theta)_p, where tau_theta is already the derivative factor.
inline ThetaSignal nontransversal_product(const ThetaSignal& sigma, const ThetaSignal& tau_theta, double p,
                                          CutoffKernel k = CutoffKernel::Smoothstep5) {
  return moment_zero(product(sigma, tau_theta), p, k);
}

}  // namespace pulse_optics
