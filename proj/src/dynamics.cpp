#include "chemo/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "chemo/rng.hpp"

namespace chemo {

void PatientParams::validate() const {
  const struct {
    const char* name;
    double v;
  } fields[] = {{"r1", r1}, {"r2", r2}, {"b1", b1}, {"b2", b2}, {"c1", c1},
                {"c2", c2}, {"c3", c3}, {"c4", c4}, {"a1", a1}, {"a2", a2},
                {"a3", a3}, {"d1", d1}, {"d2", d2}, {"s", s},   {"rho", rho},
                {"alpha", alpha}};
  for (const auto& f : fields) {
    if (!std::isfinite(f.v) || f.v < 0.0)
      throw std::invalid_argument(std::string("patient parameter ") + f.name +
                                  " must be finite and nonnegative, got " +
                                  std::to_string(f.v));
  }
  const struct {
    const char* name;
    double v;
  } positive[] = {{"b1", b1}, {"b2", b2}, {"d2", d2}, {"alpha", alpha}};
  for (const auto& f : positive) {
    if (f.v <= 0.0)
      throw std::invalid_argument(std::string("patient parameter ") + f.name +
                                  " must be strictly positive, got " +
                                  std::to_string(f.v));
  }
  if (!x0.finite() || x0.N < 0 || x0.T < 0 || x0.I < 0 || x0.C < 0)
    throw std::invalid_argument("patient x0 must be finite and nonnegative");
}

StateVec drift(const StateVec& x, double u, const PatientParams& p) {
  if (!x.finite() || !std::isfinite(u))
    throw std::invalid_argument("drift: non-finite state or dose");
  const double sat = x.T / (p.alpha + x.T);
  StateVec f;
  f.N = p.r2 * x.N * (1.0 - p.b2 * x.N) - p.c4 * x.N * x.T - p.a3 * x.N * x.C;
  f.T = p.r1 * x.T * (1.0 - p.b1 * x.T) - p.c2 * x.I * x.T - p.c3 * x.T * x.N -
        p.a2 * x.T * x.C;
  f.I = p.s + p.rho * x.I * sat - p.c1 * x.I * x.T - p.d1 * x.I - p.a1 * x.I * x.C;
  f.C = -p.d2 * x.C + u;
  return f;
}

void drift_jacobian(const StateVec& x, double u, const PatientParams& p,
                    double A[4][4], double B[4]) {
  if (!x.finite() || !std::isfinite(u))
    throw std::invalid_argument("drift_jacobian: non-finite state or dose");
  const double at = p.alpha + x.T;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) A[i][j] = 0.0;

  A[0][0] = p.r2 * (1.0 - 2.0 * p.b2 * x.N) - p.c4 * x.T - p.a3 * x.C;
  A[0][1] = -p.c4 * x.N;
  A[0][3] = -p.a3 * x.N;

  A[1][0] = -p.c3 * x.T;
  A[1][1] = p.r1 * (1.0 - 2.0 * p.b1 * x.T) - p.c2 * x.I - p.c3 * x.N - p.a2 * x.C;
  A[1][2] = -p.c2 * x.T;
  A[1][3] = -p.a2 * x.T;

  A[2][1] = p.rho * x.I * p.alpha / (at * at) - p.c1 * x.I;
  A[2][2] = p.rho * x.T / at - p.c1 * x.T - p.d1 - p.a1 * x.C;
  A[2][3] = -p.a1 * x.I;

  A[3][3] = -p.d2;

  B[0] = B[1] = B[2] = 0.0;
  B[3] = 1.0;
}

void drift_weighted_hessian(const StateVec& x, const PatientParams& p,
                            const double w[4], double M[4][4]) {
  if (!x.finite())
    throw std::invalid_argument("drift_weighted_hessian: non-finite state");
  const double at = p.alpha + x.T;
  const double sat1 = p.alpha / (at * at);         // d/dT of T/(alpha+T)
  const double sat2 = -2.0 * p.alpha / (at * at * at);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) M[i][j] = 0.0;

  M[0][0] = w[0] * (-2.0 * p.r2 * p.b2);
  M[0][1] = w[0] * (-p.c4) + w[1] * (-p.c3);
  M[0][3] = w[0] * (-p.a3);
  M[1][1] = w[1] * (-2.0 * p.r1 * p.b1) + w[2] * (p.rho * x.I * sat2);
  M[1][2] = w[1] * (-p.c2) + w[2] * (p.rho * sat1 - p.c1);
  M[1][3] = w[1] * (-p.a2);
  M[2][3] = w[2] * (-p.a1);

  M[1][0] = M[0][1];
  M[3][0] = M[0][3];
  M[2][1] = M[1][2];
  M[3][1] = M[1][3];
  M[3][2] = M[2][3];
}

namespace {

StateVec clamp_nonneg(StateVec x) {
  x.N = std::max(x.N, 0.0);
  x.T = std::max(x.T, 0.0);
  x.I = std::max(x.I, 0.0);
  x.C = std::max(x.C, 0.0);
  return x;
}

void require_stage_finite(const StateVec& x, const char* where) {
  if (!x.finite())
    throw std::runtime_error(std::string("integration step rejected: non-finite "
                                         "intermediate at ") + where);
}

}  // namespace

StateVec rk4_step(const StateVec& x, double u, double dt, const PatientParams& p) {
  const StateVec k1 = drift(x, u, p);
  const StateVec x2 = x + (dt / 2.0) * k1;
  require_stage_finite(x2, "rk4 stage 2");
  const StateVec k2 = drift(x2, u, p);
  const StateVec x3 = x + (dt / 2.0) * k2;
  require_stage_finite(x3, "rk4 stage 3");
  const StateVec k3 = drift(x3, u, p);
  const StateVec x4 = x + dt * k3;
  require_stage_finite(x4, "rk4 stage 4");
  const StateVec k4 = drift(x4, u, p);
  const StateVec out =
      x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  require_stage_finite(out, "rk4 result");
  return clamp_nonneg(out);
}

StateVec euler_maruyama_step(const StateVec& x, double u, double dt, double g,
                             double z, const PatientParams& p) {
  const StateVec f = drift(x, u, p);
  StateVec out = x + dt * f;
  out.T += g * std::sqrt(dt) * z;
  require_stage_finite(out, "euler-maruyama result");
  return clamp_nonneg(out);
}

Trajectory simulate(const Policy& policy, const PatientParams& p,
                    const StateVec& x0, const SimOptions& opt) {
  p.validate();
  if (!x0.finite() || x0.N < 0 || x0.T < 0 || x0.I < 0 || x0.C < 0)
    throw std::invalid_argument("simulate: x0 must be finite and nonnegative");
  if (!(opt.dt_days > 0) || !(opt.horizon_days >= 0))
    throw std::invalid_argument("simulate: dt_days must be > 0 and horizon >= 0");
  const int substeps = opt.stochastic ? opt.em_substeps : opt.rk4_substeps;
  if (substeps < 1) throw std::invalid_argument("simulate: substeps must be >= 1");

  const int n_steps =
      static_cast<int>(std::ceil(opt.horizon_days / opt.dt_days - 1e-12));
  Trajectory traj;
  traj.t.reserve(n_steps + 1);
  traj.x.reserve(n_steps + 1);
  traj.u.reserve(n_steps + 1);

  RngStream rng(opt.seed, opt.stream);
  StateVec x = x0;
  traj.t.push_back(0.0);
  traj.x.push_back(x);
  if (x.T <= opt.cure_threshold) traj.cure_time = 0.0;

  for (int k = 0; k < n_steps; ++k) {
    const double t_k = k * opt.dt_days;
    // A final short interval exists only when the horizon is genuinely not a
    // multiple of dt; otherwise every step spans exactly dt so substep widths
    // are bit-identical across intervals.
    const bool partial = (k + 1 == n_steps) &&
                         (opt.horizon_days < (k + 1) * opt.dt_days * (1.0 - 1e-12));
    const double t_next = partial ? opt.horizon_days : (k + 1) * opt.dt_days;
    const double uraw = policy.dose(t_k, x);
    if (!std::isfinite(uraw))
      throw std::runtime_error("simulate: policy returned non-finite dose");
    const double u = std::clamp(uraw, 0.0, opt.u_max);
    if (u != uraw) traj.clipped_dose = true;

    const double h = (partial ? (t_next - t_k) : opt.dt_days) / substeps;
    for (int i = 0; i < substeps; ++i) {
      x = opt.stochastic
              ? euler_maruyama_step(x, u, h, opt.diffusion_g, rng.normal(), p)
              : rk4_step(x, u, h, p);
      if (std::isnan(traj.cure_time) && x.T <= opt.cure_threshold)
        traj.cure_time = t_k + (i + 1) * h;
    }
    traj.u.push_back(u);
    traj.t.push_back(t_next);
    traj.x.push_back(x);
  }
  traj.u.push_back(traj.u.empty() ? 0.0 : traj.u.back());
  return traj;
}

}  // namespace chemo
