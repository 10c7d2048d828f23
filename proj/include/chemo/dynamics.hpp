#pragma once

#include <cstdint>

#include "chemo/state.hpp"

namespace chemo {

/// Right-hand side of the tumor–immune–drug ODE system at state x under dose
/// rate u. Throws std::invalid_argument on non-finite input.
StateVec drift(const StateVec& x, double u, const PatientParams& p);

/// Analytic Jacobian of drift: A = df/dx (row-major 4x4), B = df/du.
void drift_jacobian(const StateVec& x, double u, const PatientParams& p,
                    double A[4][4], double B[4]);

/// State Hessian of the weighted drift w.f(x, u): M[a][b] = sum_i w_i
/// d2 f_i / dx_a dx_b (symmetric 4x4). The dose enters the model linearly,
/// so mixed and pure dose second derivatives vanish identically.
void drift_weighted_hessian(const StateVec& x, const PatientParams& p,
                            const double w[4], double M[4][4]);

/// One classical RK4 step of length dt under constant dose u. Negative
/// components of the result are clamped to 0. Throws std::runtime_error if an
/// intermediate stage evaluates non-finite.
StateVec rk4_step(const StateVec& x, double u, double dt, const PatientParams& p);

/// One Euler–Maruyama step with additive diffusion g acting only on the tumor
/// equation; z is a standard-normal draw supplied by the caller. Negative
/// components of the result are clamped to 0.
StateVec euler_maruyama_step(const StateVec& x, double u, double dt, double g,
                             double z, const PatientParams& p);

/// A dose-rate source queried once per control interval. Open-loop schedules
/// ignore the state argument; feedback policies ignore nothing.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual double dose(double t_days, const StateVec& x) const = 0;
};

class ConstantPolicy final : public Policy {
 public:
  explicit ConstantPolicy(double u) : u_(u) {}
  double dose(double, const StateVec&) const override { return u_; }

 private:
  double u_;
};

struct SimOptions {
  double dt_days = 0.3;       // control interval; states recorded at this grid
  double horizon_days = 150.0;
  int rk4_substeps = 10;      // deterministic substeps per control interval
  int em_substeps = 30;       // stochastic substeps per control interval
  double u_max = 10.0;
  double cure_threshold = 1e-2;
  bool stochastic = false;
  double diffusion_g = 0.0;
  std::uint64_t seed = 0;     // stochastic mode only
  std::uint64_t stream = 0;
};

/// Roll the model forward under a policy. Doses are saturated to [0, u_max]
/// (flagged in the result). cure_time records the first substep time at which
/// T <= cure_threshold; integration always continues to the horizon.
Trajectory simulate(const Policy& policy, const PatientParams& p,
                    const StateVec& x0, const SimOptions& opt);

}  // namespace chemo
