#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"

namespace pulse_optics {

using json = nlohmann::json;

/// Quasilinear system  d_t u + sum_j A_j(u) d_j u = F u,  B(u) u = G  on x_d = 0.
/// Coefficients are affine in u.  A[j] holds A_{j+1}(0); dA[j][k] = dA_{j+1}/du_k.
struct SystemSpec {
  int N = 0;
  int d = 1;
  int p = 0;
  std::vector<Mat> A;
  std::vector<std::vector<Mat>> dA;
  Mat F0;
  Mat B0;
  std::vector<Mat> dB;  // empty: B constant

  const Mat& Ad() const { return A.back(); }

  Mat A_at(int j, const Vec& u) const {
    Mat M = A[j];
    for (int k = 0; k < N; ++k) M += u(k) * dA[j][k];
    return M;
  }
  /// dA_j . w  (directional derivative of A_{j+1} at 0).
  Mat dA_dir(int j, const Vec& w) const {
    Mat M = Mat::Zero(N, N);
    for (int k = 0; k < N; ++k) M += w(k) * dA[j][k];
    return M;
  }
  Mat B_at(const Vec& u) const {
    Mat M = B0;
    for (size_t k = 0; k < dB.size(); ++k) M += u(static_cast<Eigen::Index>(k)) * dB[k];
    return M;
  }
  bool is_linear() const {
    for (const auto& row : dA)
      for (const auto& m : row)
        if (m.cwiseAbs().maxCoeff() > 0) return false;
    for (const auto& m : dB)
      if (m.cwiseAbs().maxCoeff() > 0) return false;
    return true;
  }
};

namespace detail {

inline Mat matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::Structural, std::string(what) + ": expected nested array");
  if (!j[0].is_array()) {
    Mat m(1, static_cast<Eigen::Index>(j.size()));
    for (size_t c = 0; c < j.size(); ++c) m(0, static_cast<Eigen::Index>(c)) = j[c].get<double>();
    return m;
  }
  const size_t rows = j.size();
  const size_t cols = j[0].size();
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (size_t r = 0; r < rows; ++r) {
    if (j[r].size() != cols) throw Error(ErrorKind::Structural, std::string(what) + ": ragged rows");
    for (size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

inline json matrix_to_json(const Mat& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

inline bool is_matrix_list(const json& j) {
  return j.is_array() && !j.empty() && j[0].is_array() && !j[0].empty() && j[0][0].is_array();
}

}  // namespace detail

/// Reads the `system` section.  Shape errors are structural; semantic checks live in validate_system.
inline SystemSpec system_from_json(const json& sys) {
  SystemSpec s;
  if (!sys.contains("N") || !sys.contains("Ad0") || !sys.contains("B0"))
    throw Error(ErrorKind::Structural, "system needs N, Ad0 and B0");
  s.N = sys.at("N").get<int>();
  s.d = sys.value("d", 1);
  if (s.N < 2) throw Error(ErrorKind::Structural, "N must be at least 2");
  if (s.d < 1) throw Error(ErrorKind::Structural, "d must be at least 1");

  const json& ad = sys.at("Ad0");
  if (detail::is_matrix_list(ad)) {
    for (const auto& m : ad) s.A.push_back(detail::matrix_from_json(m, "Ad0"));
  } else {
    s.A.push_back(detail::matrix_from_json(ad, "Ad0"));
  }
  if (static_cast<int>(s.A.size()) != s.d) throw Error(ErrorKind::Structural, "Ad0 must list d matrices");
  for (const auto& m : s.A)
    if (m.rows() != s.N || m.cols() != s.N) throw Error(ErrorKind::Structural, "A_j(0) must be N x N");

  s.dA.assign(s.d, std::vector<Mat>(s.N, Mat::Zero(s.N, s.N)));
  if (sys.contains("dA")) {
    const json& da = sys.at("dA");
    if (static_cast<int>(da.size()) != s.d) throw Error(ErrorKind::Structural, "dA must have d entries");
    for (int j = 0; j < s.d; ++j) {
      if (static_cast<int>(da[j].size()) != s.N) throw Error(ErrorKind::Structural, "dA[j] must have N matrices");
      for (int k = 0; k < s.N; ++k) {
        s.dA[j][k] = detail::matrix_from_json(da[j][k], "dA");
        if (s.dA[j][k].rows() != s.N || s.dA[j][k].cols() != s.N)
          throw Error(ErrorKind::Structural, "dA[j][k] must be N x N");
      }
    }
  }

  s.F0 = sys.contains("F0") ? detail::matrix_from_json(sys.at("F0"), "F0") : Mat::Zero(s.N, s.N);
  if (s.F0.rows() != s.N || s.F0.cols() != s.N) throw Error(ErrorKind::Structural, "F0 must be N x N");

  s.B0 = detail::matrix_from_json(sys.at("B0"), "B0");
  s.p = static_cast<int>(s.B0.rows());
  if (s.B0.cols() != s.N) throw Error(ErrorKind::Structural, "B0 must have N columns");
  if (s.p <= 0 || s.p >= s.N) throw Error(ErrorKind::Structural, "need 0 < p < N");

  if (sys.contains("dB")) {
    const json& db = sys.at("dB");
    if (static_cast<int>(db.size()) != s.N) throw Error(ErrorKind::Structural, "dB must have N matrices");
    for (int k = 0; k < s.N; ++k) {
      s.dB.push_back(detail::matrix_from_json(db[k], "dB"));
      if (s.dB.back().rows() != s.p || s.dB.back().cols() != s.N)
        throw Error(ErrorKind::Structural, "dB[k] must be p x N");
    }
  }
  return s;
}

inline json system_to_json(const SystemSpec& s) {
  json j;
  j["N"] = s.N;
  j["d"] = s.d;
  json ad = json::array();
  for (const auto& m : s.A) ad.push_back(detail::matrix_to_json(m));
  j["Ad0"] = ad;
  json da = json::array();
  for (const auto& row : s.dA) {
    json r = json::array();
    for (const auto& m : row) r.push_back(detail::matrix_to_json(m));
    da.push_back(r);
  }
  j["dA"] = da;
  j["F0"] = detail::matrix_to_json(s.F0);
  j["B0"] = detail::matrix_to_json(s.B0);
  if (!s.dB.empty()) {
    json db = json::array();
    for (const auto& m : s.dB) db.push_back(detail::matrix_to_json(m));
    j["dB"] = db;
  }
  return j;
}

/// EX1: A_1(0) = diag(2,-1,1), B(0) = [[1,1,0],[0,1,1]], dA_1 . u = diag(u).
inline SystemSpec ex1_system(bool nonlinear = true) {
  SystemSpec s;
  s.N = 3;
  s.d = 1;
  s.p = 2;
  s.A = {Mat(Eigen::Vector3d(2.0, -1.0, 1.0).asDiagonal())};
  s.dA.assign(1, std::vector<Mat>(3, Mat::Zero(3, 3)));
  if (nonlinear)
    for (int k = 0; k < 3; ++k) s.dA[0][k](k, k) = 1.0;
  s.F0 = Mat::Zero(3, 3);
  s.B0.resize(2, 3);
  s.B0 << 1, 1, 0, 0, 1, 1;
  return s;
}

/// EX1 with cross-family quadratic couplings: dA_1/du_k = D_k.
inline SystemSpec ex1_coupled_system() {
  SystemSpec s = ex1_system(false);
  s.dA[0][0] << 1, 0, 0, 0, 0, 0, 1, 0, 0;
  s.dA[0][1] << 0, 0, 0, 0, 1, 0, 0, 0, 0;
  s.dA[0][2] << 0, 0, -1, 0, 0, -2, 0, 0, 1;
  return s;
}

}  // namespace pulse_optics
