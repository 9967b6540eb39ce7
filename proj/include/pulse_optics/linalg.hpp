#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace pulse_optics {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using cplx = std::complex<double>;

/// Orthonormal basis of span(Z) fixed independently of how Z was produced.
/// The orthogonal projector onto span(Z) is factored by column-pivoted QR
/// (identity seed) and each column is signed so the R diagonal is positive.
struct DeterministicBasis {
  Mat basis;
  int pivot = 0;
};

inline DeterministicBasis deterministic_basis(const Mat& Z) {
  const Eigen::Index n = Z.rows();
  const Eigen::Index nu = Z.cols();
  Mat Zq = Eigen::HouseholderQR<Mat>(Z).householderQ() * Mat::Identity(n, nu);
  Mat P = Zq * Zq.transpose();
  Eigen::ColPivHouseholderQR<Mat> qr(P);
  Mat Q = qr.householderQ() * Mat::Identity(n, nu);
  Mat R = qr.matrixR().topLeftCorner(nu, nu).template triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < nu; ++c)
    if (R(c, c) < 0) Q.col(c) = -Q.col(c);
  DeterministicBasis out;
  out.basis = Q;
  out.pivot = static_cast<int>(qr.colsPermutation().indices()(0));
  return out;
}

inline double min_singular_value(const Mat& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(A);
  return svd.singularValues().minCoeff();
}

inline double min_singular_value(const CMat& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMat> svd(A);
  return svd.singularValues().minCoeff();
}

inline double condition_number(const CMat& A) {
  Eigen::JacobiSVD<CMat> svd(A);
  const auto& s = svd.singularValues();
  if (s.minCoeff() <= 0) return INFINITY;
  return s.maxCoeff() / s.minCoeff();
}

/// Fornberg weights for the first derivative at 0 on integer offsets (unit spacing).
inline std::vector<double> derivative_weights(const std::vector<int>& offsets, int order = 1) {
  const int n = static_cast<int>(offsets.size());
  std::vector<std::vector<std::vector<double>>> c(
      n, std::vector<std::vector<double>>(n, std::vector<double>(order + 1, 0.0)));
  c[0][0][0] = 1.0;
  double c1 = 1.0;
  double c4 = offsets[0];
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = offsets[i];
    for (int j = 0; j < i; ++j) {
      const double c3 = offsets[i] - offsets[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][i][k] = c1 * (k * c[i - 1][i - 1][k - 1] - c5 * c[i - 1][i - 1][k]) / c2;
        c[i][i][0] = -c1 * c5 * c[i - 1][i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[i][j][k] = (c4 * c[i - 1][j][k] - k * c[i - 1][j][k - 1]) / c3;
      c[i][j][0] = c4 * c[i - 1][j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (int j = 0; j < n; ++j) w[j] = c[n - 1][j][order];
  return w;
}

/// Lagrange weights on nodes 0..order for the fractional position x (node-relative).
inline void lagrange_weights(int order, double x, double* w) {
  for (int j = 0; j <= order; ++j) {
    double v = 1.0;
    for (int k = 0; k <= order; ++k)
      if (k != j) v *= (x - k) / double(j - k);
    w[j] = v;
  }
}

}  // namespace pulse_optics
