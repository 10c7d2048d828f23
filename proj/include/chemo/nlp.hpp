#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <string>
#include <vector>

#include "chemo/config.hpp"

namespace chemo {

/// Smooth nonlinear program
///     minimize f(x)  subject to  c(x) = 0,  lo <= x <= hi,
/// with an analytic sparse constraint Jacobian. Bounds may be infinite.
class NlpProblem {
 public:
  virtual ~NlpProblem() = default;

  virtual int num_vars() const = 0;
  virtual int num_eq() const = 0;
  virtual void bounds(Eigen::VectorXd& lo, Eigen::VectorXd& hi) const = 0;

  /// Returns f(x); if grad is non-null it receives df/dx (resized).
  virtual double objective(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const = 0;

  /// Fills c(x) (resized to num_eq()).
  virtual void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c) const = 0;

  /// Appends dc_r/dx_c entries as (r, c, value) triplets. Cleared by caller.
  virtual void jacobian(const Eigen::VectorXd& x,
                        std::vector<Eigen::Triplet<double>>& trips) const = 0;

  /// Optional curvature oracle: appends the lower triangle (row >= col) of
  /// the symmetric Hessian of f(x) + w.c(x) as triplets (duplicates are
  /// summed; each off-diagonal pair must be emitted once, lower orientation).
  /// Problems that implement it are solved with a projected-Newton inner
  /// method; the default (returns false) selects projected L-BFGS instead.
  virtual bool lagrangian_hessian(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& w,
                                  std::vector<Eigen::Triplet<double>>& trips) const {
    (void)x;
    (void)w;
    (void)trips;
    return false;
  }
};

enum class SolveStatus { optimal, infeasible, iteration_limit };

const char* to_string(SolveStatus s);

struct SolveReport {
  SolveStatus status = SolveStatus::iteration_limit;
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;       // equality multiplier estimates
  double objective = 0.0;       // f at the returned point
  double max_violation = 0.0;   // ||c||_inf at the returned point
  double kkt_residual = 0.0;    // projected-gradient inf-norm of the augmented
                                // Lagrangian at the returned point
  int outer_iters = 0;
  int inner_iters = 0;          // total line-search iterations across outers
  std::string message;
};

/// Bound-constrained augmented-Lagrangian method. Each outer iteration
/// minimizes f + lambda.c + (mu/2)||c||^2 over the box — with a projected
/// Newton method (sparse LDLT on the free variables, Levenberg shift) when
/// the problem supplies `lagrangian_hessian`, otherwise with projected
/// L-BFGS — then updates lambda (on sufficient feasibility progress) or
/// grows mu. Declares infeasibility when the constraint violation stops
/// improving by `stall_improvement` for `stall_outer_limit` consecutive
/// outer iterations while still above `feas_tol`.
SolveReport solve_augmented_lagrangian(const NlpProblem& prob,
                                       const Eigen::VectorXd& x0,
                                       const SolverConfig& cfg);

}  // namespace chemo
