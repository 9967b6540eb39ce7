#pragma once

#include <cmath>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"
#include "system.hpp"

namespace pulse_optics {

/// Boundary datum G(t, theta0) = amplitude * envelope(t) * shape(theta0).
/// The envelope vanishes for t <= onset with all derivatives and reaches 1 at t = onset + rise.
struct BoundaryPulse {
  Vec amplitude;
  double rise = 0.02;
  double onset = 0.0;
  double center = 5.0;
  double width = 1.0;
  // Tabulated shape on [tab_lo, tab_hi]; used instead of the Gaussian when non-empty.
  std::vector<double> table;
  double tab_lo = 0.0;
  double tab_hi = 0.0;

  double envelope(double t) const {
    t -= onset;
    if (t <= 0) return 0.0;
    if (t >= rise) return 1.0;
    const double x = t / rise;
    const double a = std::exp(-1.0 / x), b = std::exp(-1.0 / (1.0 - x));
    return a / (a + b);
  }

  double shape(double th) const {
    if (table.empty()) {
      const double z = (th - center) / width;
      return std::exp(-z * z);
    }
    if (th <= tab_lo || th >= tab_hi) return 0.0;
    const int n = static_cast<int>(table.size());
    const double h = (tab_hi - tab_lo) / (n - 1);
    const double x = (th - tab_lo) / h;
    int lo = static_cast<int>(std::floor(x)) - 1;
    lo = std::max(0, std::min(lo, n - 4));
    double w[4];
    lagrange_weights(3, x - lo, w);
    double s = 0.0;
    for (int j = 0; j < 4; ++j) s += w[j] * table[static_cast<size_t>(lo + j)];
    return s;
  }

  double scalar(double t, double th) const { return envelope(t) * shape(th); }

  Vec operator()(double t, double th) const { return amplitude * scalar(t, th); }

  bool is_zero() const { return amplitude.size() == 0 || amplitude.cwiseAbs().maxCoeff() == 0.0; }
};

inline BoundaryPulse pulse_from_json(const json& j, int p) {
  BoundaryPulse g;
  if (!j.contains("amplitude")) throw Error(ErrorKind::Configuration, "pulse.amplitude missing");
  const auto& a = j.at("amplitude");
  if (static_cast<int>(a.size()) != p) throw Error(ErrorKind::Configuration, "pulse.amplitude must have p entries");
  g.amplitude.resize(p);
  for (int i = 0; i < p; ++i) g.amplitude(i) = a[static_cast<size_t>(i)].get<double>();
  g.rise = j.value("rise", g.rise);
  g.onset = j.value("onset", g.onset);
  g.center = j.value("center", g.center);
  g.width = j.value("width", g.width);
  if (j.contains("table")) {
    g.table = j.at("table").get<std::vector<double>>();
    g.tab_lo = j.at("table_lo").get<double>();
    g.tab_hi = j.at("table_hi").get<double>();
    if (g.table.size() < 4 || !(g.tab_hi > g.tab_lo))
      throw Error(ErrorKind::Configuration, "pulse.table needs at least 4 samples on a nonempty interval");
  }
  if (!(g.rise > 0)) throw Error(ErrorKind::Configuration, "pulse.rise must be positive");
  return g;
}

}  // namespace pulse_optics
