#include "chemo/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace chemo {

namespace {

using Eigen::VectorXd;

StateVec state_at(const VectorXd& z, int base) {
  return {z(base), z(base + 1), z(base + 2), z(base + 3)};
}

/// Hermite basis on s in [0,1] (value form) and its s-derivative.
struct HermiteBasis {
  double h00, h10, h01, h11;
};
HermiteBasis hermite_value(double s) {
  const double s2 = s * s, s3 = s2 * s;
  return {2 * s3 - 3 * s2 + 1, s3 - 2 * s2 + s, -2 * s3 + 3 * s2, s3 - s2};
}
HermiteBasis hermite_deriv(double s) {
  const double s2 = s * s;
  return {6 * s2 - 6 * s, 3 * s2 - 4 * s + 1, -6 * s2 + 6 * s, 3 * s2 - 2 * s};
}

/// Quadratic through (0,u0), (1/2,um), (1,u1) evaluated at s.
double quad_control(double u0, double um, double u1, double s) {
  return u0 * (2 * s * s - 3 * s + 1) + um * (4 * s - 4 * s * s) +
         u1 * (2 * s * s - s);
}

/// Locates the interval index containing normalized time tau.
int find_interval(const std::vector<double>& tau, double t_norm) {
  const auto it = std::upper_bound(tau.begin(), tau.end(), t_norm);
  int k = static_cast<int>(it - tau.begin()) - 1;
  return std::clamp(k, 0, static_cast<int>(tau.size()) - 2);
}

/// Pure feasibility restoration: minimize 0.5||c(z)||^2 over the same box.
class FeasibilityNlp : public NlpProblem {
 public:
  explicit FeasibilityNlp(const HermiteSimpsonNlp& inner) : inner_(inner) {}
  int num_vars() const override { return inner_.num_vars(); }
  int num_eq() const override { return 0; }
  void bounds(VectorXd& lo, VectorXd& hi) const override { inner_.bounds(lo, hi); }
  double objective(const VectorXd& z, VectorXd* grad) const override {
    inner_.constraints(z, c_);
    if (grad) {
      trips_.clear();
      inner_.jacobian(z, trips_);
      grad->setZero(num_vars());
      for (const auto& t : trips_) (*grad)(t.col()) += t.value() * c_(t.row());
    }
    return 0.5 * c_.squaredNorm();
  }
  void constraints(const VectorXd&, VectorXd& c) const override { c.resize(0); }
  void jacobian(const VectorXd&, std::vector<Eigen::Triplet<double>>&) const override {}

  /// Exact curvature of the residual objective: J^T J plus the residual-
  /// weighted constraint curvature.
  bool lagrangian_hessian(const VectorXd& z, const VectorXd&,
                          std::vector<Eigen::Triplet<double>>& trips) const override {
    inner_.constraints(z, c_);
    trips_.clear();
    inner_.jacobian(z, trips_);
    using SpMat = Eigen::SparseMatrix<double>;
    SpMat J(inner_.num_eq(), inner_.num_vars());
    J.setFromTriplets(trips_.begin(), trips_.end());
    const SpMat JtJ = SpMat(J.transpose()) * J;
    for (int k = 0; k < JtJ.outerSize(); ++k)
      for (SpMat::InnerIterator it(JtJ, k); it; ++it)
        if (it.row() >= it.col()) trips.emplace_back(it.row(), it.col(), it.value());
    inner_.constraint_hessian(z, c_, trips);
    return true;
  }

 private:
  const HermiteSimpsonNlp& inner_;
  mutable VectorXd c_;
  mutable std::vector<Eigen::Triplet<double>> trips_;
};

}  // namespace

HermiteSimpsonNlp::HermiteSimpsonNlp(OcProblem prob, OcpConfig cfg,
                                     std::vector<double> tau)
    : prob_(std::move(prob)), cfg_(std::move(cfg)), tau_(std::move(tau)) {
  nodes_ = static_cast<int>(tau_.size());
  intervals_ = nodes_ - 1;
  if (nodes_ < 2) throw std::invalid_argument("collocation: need at least 2 nodes");
  if (tau_.front() != 0.0 || tau_.back() != 1.0)
    throw std::invalid_argument("collocation: mesh must span [0, 1]");
  for (int k = 0; k < intervals_; ++k)
    if (!(tau_[k + 1] > tau_[k]))
      throw std::invalid_argument("collocation: mesh must be strictly increasing");
  if (prob_.case_name != "case0" && prob_.case_name != "patient")
    throw std::invalid_argument("collocation: unknown case '" + prob_.case_name + "'");
  prob_.params.validate();
}

int HermiteSimpsonNlp::num_vars() const {
  return 4 * nodes_ + 4 * intervals_ + nodes_ + intervals_ + 1;
}

int HermiteSimpsonNlp::num_eq() const { return 8 * intervals_; }

void HermiteSimpsonNlp::bounds(VectorXd& lo, VectorXd& hi) const {
  const int n = num_vars();
  lo.setConstant(n, 0.0);
  hi.setConstant(n, cfg_.state_upper);

  if (prob_.case_name == "patient") {
    for (int k = 0; k < nodes_; ++k) {
      lo(ix(k, 0)) = prob_.health_floor_n;
      lo(ix(k, 2)) = prob_.health_floor_i;
    }
    for (int k = 0; k < intervals_; ++k) {
      lo(im(k, 0)) = prob_.health_floor_n;
      lo(im(k, 2)) = prob_.health_floor_i;
    }
  }

  // Terminal tumor cap, then the pinned initial state (pin wins at node 0).
  hi(ix(nodes_ - 1, 1)) = std::min(cfg_.terminal_tumor, cfg_.state_upper);
  for (int i = 0; i < 4; ++i) {
    lo(ix(0, i)) = prob_.params.x0[i];
    hi(ix(0, i)) = prob_.params.x0[i];
  }

  for (int k = 0; k < nodes_; ++k) {
    lo(iu(k)) = 0.0;
    hi(iu(k)) = prob_.u_max;
  }
  for (int k = 0; k < intervals_; ++k) {
    lo(ium(k)) = 0.0;
    hi(ium(k)) = prob_.u_max;
  }
  lo(itf()) = cfg_.tf_min;
  hi(itf()) = cfg_.tf_max;
}

double HermiteSimpsonNlp::objective(const VectorXd& z, VectorXd* grad) const {
  const double tf = z(itf());
  const double scale = cfg_.obj_scale;
  double integral = 0.0;  // Simpson quadrature of T over the horizon
  if (grad) grad->setZero(num_vars());
  for (int k = 0; k < intervals_; ++k) {
    const double dtau = tau_[k + 1] - tau_[k];
    const double h = dtau * tf;
    const double tsum = z(ix(k, 1)) + 4.0 * z(im(k, 1)) + z(ix(k + 1, 1));
    integral += (h / 6.0) * tsum;
    if (grad) {
      (*grad)(ix(k, 1)) += scale * h / 6.0;
      (*grad)(im(k, 1)) += scale * 4.0 * h / 6.0;
      (*grad)(ix(k + 1, 1)) += scale * h / 6.0;
      (*grad)(itf()) += scale * (dtau / 6.0) * tsum;
    }
  }
  if (grad) (*grad)(itf()) += scale * cfg_.tf_weight;
  return scale * (integral + cfg_.tf_weight * tf);
}

void HermiteSimpsonNlp::constraints(const VectorXd& z, VectorXd& c) const {
  const double tf = z(itf());
  c.resize(num_eq());

  std::vector<StateVec> fn(nodes_), fm(intervals_);
  for (int k = 0; k < nodes_; ++k)
    fn[k] = drift(state_at(z, ix(k, 0)), z(iu(k)), prob_.params);
  for (int k = 0; k < intervals_; ++k)
    fm[k] = drift(state_at(z, im(k, 0)), z(ium(k)), prob_.params);

  for (int k = 0; k < intervals_; ++k) {
    const double h = (tau_[k + 1] - tau_[k]) * tf;
    for (int i = 0; i < 4; ++i) {
      const double xk = z(ix(k, i)), xk1 = z(ix(k + 1, i)), xm = z(im(k, i));
      c(8 * k + i) = xm - 0.5 * (xk + xk1) - (h / 8.0) * (fn[k][i] - fn[k + 1][i]);
      c(8 * k + 4 + i) =
          xk1 - xk - (h / 6.0) * (fn[k][i] + 4.0 * fm[k][i] + fn[k + 1][i]);
    }
  }
}

void HermiteSimpsonNlp::jacobian(const VectorXd& z,
                                 std::vector<Eigen::Triplet<double>>& trips) const {
  const double tf = z(itf());

  std::vector<StateVec> fn(nodes_), fm(intervals_);
  std::vector<std::array<std::array<double, 4>, 4>> An(nodes_), Am(intervals_);
  std::vector<std::array<double, 4>> Bn(nodes_), Bm(intervals_);
  {
    double A[4][4], B[4];
    for (int k = 0; k < nodes_; ++k) {
      const StateVec xk = state_at(z, ix(k, 0));
      fn[k] = drift(xk, z(iu(k)), prob_.params);
      drift_jacobian(xk, z(iu(k)), prob_.params, A, B);
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) An[k][i][j] = A[i][j];
        Bn[k][i] = B[i];
      }
    }
    for (int k = 0; k < intervals_; ++k) {
      const StateVec xk = state_at(z, im(k, 0));
      fm[k] = drift(xk, z(ium(k)), prob_.params);
      drift_jacobian(xk, z(ium(k)), prob_.params, A, B);
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) Am[k][i][j] = A[i][j];
        Bm[k][i] = B[i];
      }
    }
  }

  for (int k = 0; k < intervals_; ++k) {
    const double dtau = tau_[k + 1] - tau_[k];
    const double h = dtau * tf;
    for (int i = 0; i < 4; ++i) {
      const int rm = 8 * k + i;       // midpoint interpolation row
      const int rs = 8 * k + 4 + i;   // Simpson defect row

      for (int j = 0; j < 4; ++j) {
        const double dij = i == j ? 1.0 : 0.0;
        trips.emplace_back(rm, ix(k, j), -0.5 * dij - (h / 8.0) * An[k][i][j]);
        trips.emplace_back(rm, ix(k + 1, j),
                           -0.5 * dij + (h / 8.0) * An[k + 1][i][j]);
        trips.emplace_back(rs, ix(k, j), -dij - (h / 6.0) * An[k][i][j]);
        trips.emplace_back(rs, ix(k + 1, j), dij - (h / 6.0) * An[k + 1][i][j]);
        trips.emplace_back(rs, im(k, j), -(4.0 * h / 6.0) * Am[k][i][j]);
      }
      trips.emplace_back(rm, im(k, i), 1.0);

      if (Bn[k][i] != 0.0) {
        trips.emplace_back(rm, iu(k), -(h / 8.0) * Bn[k][i]);
        trips.emplace_back(rs, iu(k), -(h / 6.0) * Bn[k][i]);
      }
      if (Bn[k + 1][i] != 0.0) {
        trips.emplace_back(rm, iu(k + 1), (h / 8.0) * Bn[k + 1][i]);
        trips.emplace_back(rs, iu(k + 1), -(h / 6.0) * Bn[k + 1][i]);
      }
      if (Bm[k][i] != 0.0)
        trips.emplace_back(rs, ium(k), -(4.0 * h / 6.0) * Bm[k][i]);

      trips.emplace_back(rm, itf(), -(dtau / 8.0) * (fn[k][i] - fn[k + 1][i]));
      trips.emplace_back(rs, itf(),
                         -(dtau / 6.0) * (fn[k][i] + 4.0 * fm[k][i] + fn[k + 1][i]));
    }
  }
}

void HermiteSimpsonNlp::constraint_hessian(
    const VectorXd& z, const VectorXd& w,
    std::vector<Eigen::Triplet<double>>& trips) const {
  const double tf = z(itf());

  // One drift evaluation point contributes a state-state block weighted by
  // vt*tf (vt collects the h-coefficients of the rows referencing it, per
  // unit tf) plus a tf cross row with the same weights applied to the
  // jacobian, since the constraints depend on tf only through h = dtau * tf.
  auto add_point = [&](int xbase, int ucol, const double vt[4]) {
    const StateVec xs = state_at(z, xbase);
    const double us = z(ucol);
    const double v[4] = {tf * vt[0], tf * vt[1], tf * vt[2], tf * vt[3]};
    double M[4][4];
    drift_weighted_hessian(xs, prob_.params, v, M);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b <= a; ++b)
        if (M[a][b] != 0.0) trips.emplace_back(xbase + a, xbase + b, M[a][b]);

    double A[4][4], B[4];
    drift_jacobian(xs, us, prob_.params, A, B);
    for (int j = 0; j < 4; ++j) {
      double cross = 0.0;
      for (int i = 0; i < 4; ++i) cross += vt[i] * A[i][j];
      if (cross != 0.0) trips.emplace_back(itf(), xbase + j, cross);
    }
    double cross_u = 0.0;
    for (int i = 0; i < 4; ++i) cross_u += vt[i] * B[i];
    if (cross_u != 0.0) trips.emplace_back(itf(), ucol, cross_u);
  };

  for (int k = 0; k < intervals_; ++k) {
    const double dtau = tau_[k + 1] - tau_[k];
    double wm[4], ws[4];
    for (int i = 0; i < 4; ++i) {
      wm[i] = w(8 * k + i);
      ws[i] = w(8 * k + 4 + i);
    }
    double vtk[4], vtk1[4], vtm[4];
    for (int i = 0; i < 4; ++i) {
      vtk[i] = -(dtau / 8.0) * wm[i] - (dtau / 6.0) * ws[i];
      vtk1[i] = (dtau / 8.0) * wm[i] - (dtau / 6.0) * ws[i];
      vtm[i] = -(4.0 * dtau / 6.0) * ws[i];
    }
    add_point(ix(k, 0), iu(k), vtk);
    add_point(ix(k + 1, 0), iu(k + 1), vtk1);
    add_point(im(k, 0), ium(k), vtm);
  }
}

bool HermiteSimpsonNlp::lagrangian_hessian(
    const VectorXd& z, const VectorXd& w,
    std::vector<Eigen::Triplet<double>>& trips) const {
  // Objective curvature: the quadrature integral is bilinear in tf and the
  // tumor samples, so the only entries sit on the tf row.
  const double scale = cfg_.obj_scale;
  for (int k = 0; k < intervals_; ++k) {
    const double dtau = tau_[k + 1] - tau_[k];
    trips.emplace_back(itf(), ix(k, 1), scale * dtau / 6.0);
    trips.emplace_back(itf(), im(k, 1), scale * 4.0 * dtau / 6.0);
    trips.emplace_back(itf(), ix(k + 1, 1), scale * dtau / 6.0);
  }
  constraint_hessian(z, w, trips);
  return true;
}

VectorXd HermiteSimpsonNlp::initial_guess() const {
  VectorXd z = VectorXd::Zero(num_vars());
  const StateVec& x0 = prob_.params.x0;
  const StateVec goal{1.0, 0.0, 1.0, 0.0};  // guessed cured endpoint
  auto blend = [&](double t) {
    StateVec s;
    for (int i = 0; i < 4; ++i) s[i] = (1.0 - t) * x0[i] + t * goal[i];
    return s;
  };
  for (int k = 0; k < nodes_; ++k) {
    const StateVec s = blend(tau_[k]);
    for (int i = 0; i < 4; ++i) z(ix(k, i)) = s[i];
    z(iu(k)) = cfg_.u_init;
  }
  for (int k = 0; k < intervals_; ++k) {
    const StateVec s = blend(0.5 * (tau_[k] + tau_[k + 1]));
    for (int i = 0; i < 4; ++i) z(im(k, i)) = s[i];
    z(ium(k)) = cfg_.u_init;
  }
  z(itf()) = cfg_.tf_init;
  return z;
}

VectorXd HermiteSimpsonNlp::pack(const OcSolution& sol) const {
  if (sol.nodes() != nodes_)
    throw std::invalid_argument("collocation: solution mesh does not match");
  VectorXd z(num_vars());
  for (int k = 0; k < nodes_; ++k) {
    for (int i = 0; i < 4; ++i) z(ix(k, i)) = sol.x[k][i];
    z(iu(k)) = sol.u[k];
  }
  for (int k = 0; k < intervals_; ++k) {
    for (int i = 0; i < 4; ++i) z(im(k, i)) = sol.xm[k][i];
    z(ium(k)) = sol.um[k];
  }
  z(itf()) = sol.tf;
  return z;
}

OcSolution HermiteSimpsonNlp::unpack(const VectorXd& z) const {
  OcSolution sol;
  sol.tau = tau_;
  sol.tf = z(itf());
  sol.x.resize(nodes_);
  sol.u.resize(nodes_);
  sol.xm.resize(intervals_);
  sol.um.resize(intervals_);
  for (int k = 0; k < nodes_; ++k) {
    sol.x[k] = state_at(z, ix(k, 0));
    sol.u[k] = z(iu(k));
  }
  for (int k = 0; k < intervals_; ++k) {
    sol.xm[k] = state_at(z, im(k, 0));
    sol.um[k] = z(ium(k));
  }
  // Physical objective: Simpson quadrature of T, regularization excluded.
  double integral = 0.0;
  for (int k = 0; k < intervals_; ++k) {
    const double h = (tau_[k + 1] - tau_[k]) * sol.tf;
    integral += (h / 6.0) * (sol.x[k].T + 4.0 * sol.xm[k].T + sol.x[k + 1].T);
  }
  sol.objective = integral;
  return sol;
}

StateVec interpolate_state(const OcSolution& sol, const PatientParams& params,
                           double t_days) {
  if (sol.nodes() < 2) throw std::invalid_argument("interpolate: empty solution");
  const double t_norm = std::clamp(t_days / sol.tf, 0.0, 1.0);
  const int k = find_interval(sol.tau, t_norm);
  const double dtau = sol.tau[k + 1] - sol.tau[k];
  const double h = dtau * sol.tf;
  const double s = std::clamp((t_norm - sol.tau[k]) / dtau, 0.0, 1.0);
  const StateVec fk = drift(sol.x[k], sol.u[k], params);
  const StateVec fk1 = drift(sol.x[k + 1], sol.u[k + 1], params);
  const HermiteBasis b = hermite_value(s);
  StateVec out;
  for (int i = 0; i < 4; ++i)
    out[i] = b.h00 * sol.x[k][i] + b.h10 * h * fk[i] + b.h01 * sol.x[k + 1][i] +
             b.h11 * h * fk1[i];
  return out;
}

double interpolate_dose(const OcSolution& sol, double t_days) {
  if (sol.nodes() < 2) throw std::invalid_argument("interpolate: empty solution");
  const double t_norm = std::clamp(t_days / sol.tf, 0.0, 1.0);
  const int k = find_interval(sol.tau, t_norm);
  const double s =
      std::clamp((t_norm - sol.tau[k]) / (sol.tau[k + 1] - sol.tau[k]), 0.0, 1.0);
  return quad_control(sol.u[k], sol.um[k], sol.u[k + 1], s);
}

double average_dose(const OcSolution& sol, double t0, double t1) {
  if (sol.nodes() < 2) throw std::invalid_argument("interpolate: empty solution");
  if (!(t1 > t0)) throw std::invalid_argument("average_dose: empty window");
  const double lo = std::clamp(t0, 0.0, sol.tf);
  const double hi = std::clamp(t1, 0.0, sol.tf);
  // The profile is quadratic inside each plan interval, so per-piece Simpson
  // integrates it exactly; time past the plan's end contributes nothing.
  double integral = 0.0;
  for (int k = 0; k + 1 < sol.nodes(); ++k) {
    const double a = std::max(lo, sol.tau[k] * sol.tf);
    const double b = std::min(hi, sol.tau[k + 1] * sol.tf);
    if (b <= a) continue;
    const double mid = 0.5 * (a + b);
    integral += (b - a) / 6.0 *
                (interpolate_dose(sol, a) + 4.0 * interpolate_dose(sol, mid) +
                 interpolate_dose(sol, b));
  }
  return integral / (t1 - t0);
}

namespace {

class OpenLoopPolicy final : public Policy {
 public:
  OpenLoopPolicy(OcSolution sol, double u_max, double hold_days)
      : sol_(std::move(sol)), u_max_(u_max), hold_days_(hold_days) {}
  double dose(double t_days, const StateVec&) const override {
    if (t_days >= sol_.tf) return 0.0;
    const double t = std::max(t_days, 0.0);
    const double u = hold_days_ > 0.0 ? average_dose(sol_, t, t + hold_days_)
                                      : interpolate_dose(sol_, t);
    return std::clamp(u, 0.0, u_max_);
  }

 private:
  OcSolution sol_;
  double u_max_;
  double hold_days_;
};

/// Per-interval defect estimate of the collocation interpolant, sampled off
/// the collocation points; the classic split criterion for mesh refinement.
std::vector<double> interval_errors(const OcSolution& sol, const OcProblem& prob,
                                    const OcpConfig& cfg) {
  std::vector<double> err(sol.intervals(), 0.0);
  for (int k = 0; k < sol.intervals(); ++k) {
    const double h = (sol.tau[k + 1] - sol.tau[k]) * sol.tf;
    const StateVec fk = drift(sol.x[k], sol.u[k], prob.params);
    const StateVec fk1 = drift(sol.x[k + 1], sol.u[k + 1], prob.params);
    for (const double s : cfg.mesh_error_samples) {
      const HermiteBasis bv = hermite_value(s);
      const HermiteBasis bd = hermite_deriv(s);
      StateVec xs, dxs;
      for (int i = 0; i < 4; ++i) {
        xs[i] = bv.h00 * sol.x[k][i] + bv.h10 * h * fk[i] +
                bv.h01 * sol.x[k + 1][i] + bv.h11 * h * fk1[i];
        dxs[i] = (bd.h00 * sol.x[k][i] + bd.h10 * h * fk[i] +
                  bd.h01 * sol.x[k + 1][i] + bd.h11 * h * fk1[i]) /
                 h;
      }
      const double us =
          std::clamp(quad_control(sol.u[k], sol.um[k], sol.u[k + 1], s), 0.0,
                     prob.u_max);
      const StateVec fs = drift(xs, us, prob.params);
      for (int i = 0; i < 4; ++i)
        err[k] = std::max(err[k], h * std::abs(dxs[i] - fs[i]));
    }
  }
  return err;
}

/// Interpolates a solution onto a refined mesh for warm-starting.
OcSolution remesh(const OcSolution& sol, const OcProblem& prob,
                  const std::vector<double>& new_tau) {
  OcSolution out;
  out.tau = new_tau;
  out.tf = sol.tf;
  const int n = static_cast<int>(new_tau.size());
  out.x.resize(n);
  out.u.resize(n);
  out.xm.resize(n - 1);
  out.um.resize(n - 1);
  for (int k = 0; k < n; ++k) {
    const double t = new_tau[k] * sol.tf;
    out.x[k] = interpolate_state(sol, prob.params, t);
    out.u[k] = std::clamp(interpolate_dose(sol, t), 0.0, prob.u_max);
  }
  for (int k = 0; k < n - 1; ++k) {
    const double t = 0.5 * (new_tau[k] + new_tau[k + 1]) * sol.tf;
    out.xm[k] = interpolate_state(sol, prob.params, t);
    out.um[k] = std::clamp(interpolate_dose(sol, t), 0.0, prob.u_max);
  }
  return out;
}

struct SingleSolve {
  OcSolution sol;
  SolveReport report;
};

/// One transcription solve with feasibility triage: a non-optimal outcome is
/// polished by pure constraint minimization to decide between "genuinely
/// infeasible" and "solver ran out of road", retrying once in the latter case.
SingleSolve solve_on_mesh(const OcProblem& prob, const OcpConfig& cfg,
                          const std::vector<double>& tau, const VectorXd& guess) {
  const HermiteSimpsonNlp nlp(prob, cfg, tau);
  SolveReport rep = solve_augmented_lagrangian(nlp, guess, cfg.solver);

  if (rep.status != SolveStatus::optimal) {
    const FeasibilityNlp feas(nlp);
    SolverConfig fcfg = cfg.solver;
    fcfg.max_outer = 40;
    const SolveReport frep = solve_augmented_lagrangian(feas, rep.x, fcfg);
    VectorXd c;
    nlp.constraints(frep.x, c);
    const double best_viol = c.cwiseAbs().maxCoeff();
    if (best_viol > cfg.defect_tol) {
      rep.status = SolveStatus::infeasible;
      rep.x = frep.x;
      rep.max_violation = best_viol;
      rep.message = "defects cannot be reduced below " + std::to_string(best_viol);
    } else {
      // Feasible after all: restart the full solve from the restored point.
      const SolveReport retry = solve_augmented_lagrangian(nlp, frep.x, cfg.solver);
      if (retry.status == SolveStatus::optimal ||
          retry.max_violation <= rep.max_violation)
        rep = retry;
    }
  }

  SingleSolve out{nlp.unpack(rep.x), rep};
  out.sol.status = rep.status;
  out.sol.max_defect = rep.max_violation;
  out.sol.kkt_residual = rep.kkt_residual;
  out.sol.outer_iters = rep.outer_iters;
  out.sol.inner_iters = rep.inner_iters;
  out.sol.message = rep.message;
  return out;
}

OcSolution solve_ocp_impl(const OcProblem& prob, const OcpConfig& cfg,
                          const OcSolution* warm) {
  if (cfg.nodes < 2) throw std::invalid_argument("ocp: need at least 2 nodes");
  std::vector<double> tau(cfg.nodes);
  for (int k = 0; k < cfg.nodes; ++k)
    tau[k] = static_cast<double>(k) / (cfg.nodes - 1);
  tau.back() = 1.0;

  VectorXd guess;
  {
    const HermiteSimpsonNlp nlp(prob, cfg, tau);
    guess = warm != nullptr ? nlp.pack(remesh(*warm, prob, tau))
                            : nlp.initial_guess();
  }

  SingleSolve cur = solve_on_mesh(prob, cfg, tau, guess);
  int rounds = 0;
  while (cur.sol.status == SolveStatus::optimal && rounds < cfg.max_mesh_rounds) {
    const std::vector<double> refined = refine_mesh(prob, cfg, cur.sol);
    if (refined.size() == tau.size()) break;

    tau = refined;
    const HermiteSimpsonNlp nlp(prob, cfg, tau);
    const VectorXd warm_guess = nlp.pack(remesh(cur.sol, prob, tau));
    cur = solve_on_mesh(prob, cfg, tau, warm_guess);
    ++rounds;
  }
  cur.sol.mesh_rounds = rounds;
  return cur.sol;
}

std::vector<double> refine_mesh_impl(const OcProblem& prob, const OcpConfig& cfg,
                                     const OcSolution& sol) {
  const std::vector<double> err = interval_errors(sol, prob, cfg);
  std::vector<double> refined;
  refined.reserve(sol.tau.size() * 2);
  for (std::size_t k = 0; k + 1 < sol.tau.size(); ++k) {
    refined.push_back(sol.tau[k]);
    if (err[k] > 0.5 * cfg.defect_tol)
      refined.push_back(0.5 * (sol.tau[k] + sol.tau[k + 1]));
  }
  refined.push_back(sol.tau.back());
  return refined;
}

}  // namespace

std::vector<double> refine_mesh(const OcProblem& prob, const OcpConfig& cfg,
                                const OcSolution& sol) {
  if (sol.nodes() < 2) throw std::invalid_argument("refine: empty solution");
  return refine_mesh_impl(prob, cfg, sol);
}

OcSolution solve_ocp(const OcProblem& prob, const OcpConfig& cfg) {
  return solve_ocp_impl(prob, cfg, nullptr);
}

std::unique_ptr<Policy> make_openloop_policy(const OcSolution& sol, double u_max,
                                             double hold_days) {
  if (sol.nodes() < 2)
    throw std::invalid_argument("openloop policy: empty solution");
  if (hold_days < 0.0)
    throw std::invalid_argument("openloop policy: negative hold");
  return std::make_unique<OpenLoopPolicy>(sol, u_max, hold_days);
}

Trajectory to_trajectory(const OcSolution& sol) {
  Trajectory traj;
  traj.t.reserve(sol.nodes());
  traj.x = sol.x;
  traj.u = sol.u;
  for (const double tau : sol.tau) traj.t.push_back(tau * sol.tf);
  return traj;
}

std::string ocsolution_to_json(const OcSolution& sol) {
  nlohmann::json j;
  j["status"] = to_string(sol.status);
  j["tf"] = sol.tf;
  j["tau"] = sol.tau;
  j["u"] = sol.u;
  j["um"] = sol.um;
  auto states = nlohmann::json::array();
  for (const auto& s : sol.x) states.push_back({s.N, s.T, s.I, s.C});
  j["x"] = states;
  auto mids = nlohmann::json::array();
  for (const auto& s : sol.xm) mids.push_back({s.N, s.T, s.I, s.C});
  j["xm"] = mids;
  j["objective"] = sol.objective;
  j["max_defect"] = sol.max_defect;
  j["kkt_residual"] = sol.kkt_residual;
  j["outer_iters"] = sol.outer_iters;
  j["inner_iters"] = sol.inner_iters;
  j["mesh_rounds"] = sol.mesh_rounds;
  j["message"] = sol.message;
  return j.dump(2);
}

OcSolution ocsolution_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("solution: bad JSON: ") + e.what());
  }
  OcSolution sol;
  const std::string status = j.at("status").get<std::string>();
  if (status == "optimal") sol.status = SolveStatus::optimal;
  else if (status == "infeasible") sol.status = SolveStatus::infeasible;
  else if (status == "iteration_limit") sol.status = SolveStatus::iteration_limit;
  else throw std::runtime_error("solution: unknown status '" + status + "'");
  sol.tf = j.at("tf").get<double>();
  sol.tau = j.at("tau").get<std::vector<double>>();
  sol.u = j.at("u").get<std::vector<double>>();
  sol.um = j.at("um").get<std::vector<double>>();
  for (const auto& row : j.at("x"))
    sol.x.push_back({row.at(0).get<double>(), row.at(1).get<double>(),
                     row.at(2).get<double>(), row.at(3).get<double>()});
  for (const auto& row : j.at("xm"))
    sol.xm.push_back({row.at(0).get<double>(), row.at(1).get<double>(),
                      row.at(2).get<double>(), row.at(3).get<double>()});
  sol.objective = j.at("objective").get<double>();
  sol.max_defect = j.at("max_defect").get<double>();
  sol.kkt_residual = j.at("kkt_residual").get<double>();
  sol.outer_iters = j.at("outer_iters").get<int>();
  sol.inner_iters = j.at("inner_iters").get<int>();
  sol.mesh_rounds = j.at("mesh_rounds").get<int>();
  sol.message = j.at("message").get<std::string>();
  if (sol.tau.size() != sol.x.size() || sol.tau.size() != sol.u.size() ||
      sol.xm.size() + 1 != sol.x.size() || sol.um.size() != sol.xm.size())
    throw std::runtime_error("solution: inconsistent array lengths");
  return sol;
}

std::vector<FeasibilityEntry> feasibility_scan(const OcProblem& prob,
                                               const OcpConfig& cfg,
                                               const std::vector<double>& r1_values,
                                               const OcSolution* nominal) {
  std::vector<FeasibilityEntry> out;
  out.reserve(r1_values.size());
  for (const double r1 : r1_values) {
    OcProblem p = prob;
    p.params.r1 = r1;
    const OcSolution sol = solve_ocp_impl(p, cfg, nominal);
    out.push_back({r1, sol.status, sol.tf, sol.objective, sol.max_defect});
  }
  return out;
}

}  // namespace chemo
