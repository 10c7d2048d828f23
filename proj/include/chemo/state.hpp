#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace chemo {

/// Dimensionless model state: normal-cell, tumor-cell, immune-cell
/// populations and drug concentration.
struct StateVec {
  double N = 0.0;
  double T = 0.0;
  double I = 0.0;
  double C = 0.0;

  double operator[](int i) const {
    switch (i) {
      case 0: return N;
      case 1: return T;
      case 2: return I;
      default: return C;
    }
  }
  double& operator[](int i) {
    switch (i) {
      case 0: return N;
      case 1: return T;
      case 2: return I;
      default: return C;
    }
  }
  bool operator==(const StateVec&) const = default;

  bool finite() const {
    return std::isfinite(N) && std::isfinite(T) && std::isfinite(I) && std::isfinite(C);
  }
};

inline StateVec operator+(const StateVec& a, const StateVec& b) {
  return {a.N + b.N, a.T + b.T, a.I + b.I, a.C + b.C};
}
inline StateVec operator-(const StateVec& a, const StateVec& b) {
  return {a.N - b.N, a.T - b.T, a.I - b.I, a.C - b.C};
}
inline StateVec operator*(double s, const StateVec& a) {
  return {s * a.N, s * a.T, s * a.I, s * a.C};
}

/// Growth/kill/interaction constants of the tumor–immune–drug model plus the
/// nominal initial condition. All values are loaded from config, never
/// hard-coded.
struct PatientParams {
  double r1 = 0, r2 = 0;          // tumor / normal growth rates
  double b1 = 0, b2 = 0;          // inverse carrying capacities
  double c1 = 0, c2 = 0, c3 = 0, c4 = 0;  // competition terms
  double a1 = 0, a2 = 0, a3 = 0;  // drug kill rates (immune, tumor, normal)
  double d1 = 0, d2 = 0;          // immune death rate, drug decay rate
  double s = 0;                   // constant immune influx
  double rho = 0, alpha = 0;      // immune recruitment saturation
  StateVec x0;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;
};

/// Result of a closed- or open-loop rollout sampled on the control grid.
/// u[i] is the dose applied over [t[i], t[i+1]); the last entry repeats the
/// final applied dose so all columns have equal length.
struct Trajectory {
  std::vector<double> t;
  std::vector<StateVec> x;
  std::vector<double> u;
  double cure_time = std::numeric_limits<double>::quiet_NaN();
  bool clipped_dose = false;

  bool cured() const { return !std::isnan(cure_time); }
  double min_T() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : x) m = std::min(m, s.T);
    return m;
  }
  double final_T() const { return x.empty() ? std::numeric_limits<double>::quiet_NaN() : x.back().T; }
};

}  // namespace chemo
