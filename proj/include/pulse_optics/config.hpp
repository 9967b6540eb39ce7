#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "profile_solver.hpp"
#include "pulse.hpp"
#include "singular_solver.hpp"
#include "sweep_harness.hpp"
#include "system.hpp"

namespace pulse_optics {

/// Expected structural facts for `check`; every present field becomes an assertion.
struct CheckExpectations {
  std::optional<std::vector<double>> roots;
  std::optional<std::vector<int>> incoming;  // 1-based mode numbers
  std::optional<int> p;
  double tol = 1e-12;
};

/// One parsed config file. Sections other than `system` are optional and fall back to defaults.
struct RunConfig {
  std::string name = "run";
  SystemSpec system;
  Vec beta = Vec::Constant(1, 1.0);
  BoundaryPulse pulse;
  GridSpec profile_grid;
  ProfileOptions profile;
  bool corrector = true;
  int corrector_stride = 4;
  double quad_tol = 1e-9;
  double T = 1.0;
  double X = 2.05;
  int ppw = 24;
  double cfl = 0.8;
  int n_snap = 8;
  ExactOptions exact;
  std::vector<double> eps = {1.0 / 10, 1.0 / 20, 1.0 / 40, 1.0 / 80};
  double b = -1.0;
  SweepWindow window;
  double floor = 1e-6;
  int stability_density = 64;
  CheckExpectations expect;
  bool assert_sweep = true;
  double min_slope = 0.05;
  double slack = 0.1;
};

namespace detail {

inline SystemSpec preset_system(const std::string& name) {
  if (name == "ex1") return ex1_system(true);
  if (name == "ex1_linear") return ex1_system(false);
  if (name == "ex1_coupled") return ex1_coupled_system();
  throw Error(ErrorKind::Configuration, "unknown system preset '" + name + "'");
}

inline Vec vec_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw Error(ErrorKind::Configuration, std::string(what) + " must be an array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

}  // namespace detail

inline RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    c.name = j.value("name", c.name);
    if (j.contains("preset"))
      c.system = detail::preset_system(j.at("preset").get<std::string>());
    else if (j.contains("system"))
      c.system = system_from_json(j.at("system"));
    else
      throw Error(ErrorKind::Configuration, "config needs `system` or `preset`");
    if (j.contains("beta")) c.beta = detail::vec_from_json(j.at("beta"), "beta");
    if (c.beta.size() != c.system.d) throw Error(ErrorKind::Configuration, "beta must have d entries");
    if (j.contains("pulse")) {
      c.pulse = pulse_from_json(j.at("pulse"), c.system.p);
    } else {
      c.pulse.amplitude = Vec::Zero(c.system.p);
    }

    if (j.contains("profile")) {
      const json& p = j.at("profile");
      if (p.contains("grid")) c.profile_grid = grid_from_json(p.at("grid"));
      const std::string scheme = p.value("scheme", std::string("upwind1"));
      if (scheme == "upwind1")
        c.profile.scheme = ThetaScheme::Upwind1;
      else if (scheme == "upwind3")
        c.profile.scheme = ThetaScheme::Upwind3;
      else
        throw Error(ErrorKind::Configuration, "profile.scheme must be upwind1 or upwind3");
      c.profile.tol = p.value("tol", c.profile.tol);
      c.profile.max_iter = p.value("max_iter", c.profile.max_iter);
      c.profile.cfl = p.value("cfl", c.profile.cfl);
    }
    if (j.contains("corrector")) {
      const json& k = j.at("corrector");
      c.corrector = k.value("enabled", c.corrector);
      c.corrector_stride = k.value("stride", c.corrector_stride);
      c.quad_tol = k.value("quad_tol", c.quad_tol);
      if (c.corrector_stride < 1) throw Error(ErrorKind::Configuration, "corrector.stride must be >= 1");
    }
    if (j.contains("exact")) {
      const json& e = j.at("exact");
      c.T = e.value("T", c.T);
      c.X = e.value("X", c.X);
      c.ppw = e.value("ppw", c.ppw);
      c.cfl = e.value("cfl", c.cfl);
      c.n_snap = e.value("n_snap", c.n_snap);
      c.exact.validity = e.value("validity", c.exact.validity);
      c.exact.newton_tol = e.value("newton_tol", c.exact.newton_tol);
      c.exact.newton_max = e.value("newton_max", c.exact.newton_max);
      if (e.contains("eps")) c.eps = {e.at("eps").get<double>()};
    }
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      if (s.contains("eps")) c.eps = s.at("eps").get<std::vector<double>>();
      if (s.contains("b") && !s.at("b").is_null()) c.b = s.at("b").get<double>();
      c.floor = s.value("floor", c.floor);
      c.assert_sweep = s.value("assert", c.assert_sweep);
      c.min_slope = s.value("min_slope", c.min_slope);
      c.slack = s.value("slack", c.slack);
      if (s.contains("window")) {
        const json& w = s.at("window");
        c.window.t_lo = w.value("t_lo", c.window.t_lo);
        c.window.t_hi = w.value("t_hi", c.window.t_hi);
        c.window.x_lo = w.value("x_lo", c.window.x_lo);
        c.window.x_hi = w.value("x_hi", c.window.x_hi);
      }
    }
    if (j.contains("check")) {
      const json& k = j.at("check");
      c.stability_density = k.value("stability_density", c.stability_density);
      if (k.contains("expect")) {
        const json& e = k.at("expect");
        if (e.contains("roots")) c.expect.roots = e.at("roots").get<std::vector<double>>();
        if (e.contains("incoming")) c.expect.incoming = e.at("incoming").get<std::vector<int>>();
        if (e.contains("p")) c.expect.p = e.at("p").get<int>();
        c.expect.tol = e.value("tol", c.expect.tol);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Configuration, std::string("malformed config: ") + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot open config " + path);
  json j;
  try {
    j = json::parse(f, nullptr, true, true);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Configuration, path + ": " + e.what());
  }
  return run_config_from_json(j);
}

inline SweepConfig sweep_config(const RunConfig& c) {
  SweepConfig s;
  s.name = c.name;
  s.system = c.system;
  s.pulse = c.pulse;
  s.beta = c.beta;
  s.eps = c.eps;
  s.b = c.b;
  s.profile_grid = c.profile_grid;
  s.profile = c.profile;
  s.corrector_stride = c.corrector_stride;
  s.quad_tol = c.quad_tol;
  s.corrector = c.corrector;
  s.T = c.T;
  s.X = c.X;
  s.ppw = c.ppw;
  s.cfl = c.cfl;
  s.n_snap = c.n_snap;
  s.window = c.window;
  s.floor = c.floor;
  s.exact = c.exact;
  return s;
}

}  // namespace pulse_optics
