#pragma once

#include <memory>
#include <string>
#include <vector>

#include "chemo/config.hpp"
#include "chemo/dynamics.hpp"
#include "chemo/nlp.hpp"

namespace chemo {

/// Continuous-time dose-planning problem: minimize the time integral of the
/// tumor burden over dose profile and free horizon, subject to the model
/// dynamics, dose and state bounds, a terminal tumor cap, and (for the
/// "patient" case) healthy-cell and immune floors along the whole path.
struct OcProblem {
  PatientParams params;
  std::string case_name = "patient";  // "case0" drops the health floors
  double u_max = 10.0;
  double health_floor_n = 0.4;
  double health_floor_i = 0.4;
};

struct OcSolution {
  SolveStatus status = SolveStatus::iteration_limit;
  double tf = 0.0;
  std::vector<double> tau;    // normalized node mesh, tau.front()=0, back()=1
  std::vector<StateVec> x;    // node states
  std::vector<double> u;      // node doses
  std::vector<StateVec> xm;   // interval midpoint states
  std::vector<double> um;     // interval midpoint doses
  double objective = 0.0;     // integral of T dt (regularization excluded)
  double max_defect = 0.0;    // worst dynamics-defect residual
  double kkt_residual = 0.0;
  int outer_iters = 0;
  int inner_iters = 0;
  int mesh_rounds = 0;
  std::string message;

  int nodes() const { return static_cast<int>(tau.size()); }
  int intervals() const { return nodes() - 1; }
};

/// Separated Hermite–Simpson collocation of OcProblem on a fixed normalized
/// mesh, with the final time as a decision variable. Decision vector layout:
/// [node states][midpoint states][node doses][midpoint doses][tf].
class HermiteSimpsonNlp : public NlpProblem {
 public:
  HermiteSimpsonNlp(OcProblem prob, OcpConfig cfg, std::vector<double> tau);

  int num_vars() const override;
  int num_eq() const override;
  void bounds(Eigen::VectorXd& lo, Eigen::VectorXd& hi) const override;
  double objective(const Eigen::VectorXd& z, Eigen::VectorXd* grad) const override;
  void constraints(const Eigen::VectorXd& z, Eigen::VectorXd& c) const override;
  void jacobian(const Eigen::VectorXd& z,
                std::vector<Eigen::Triplet<double>>& trips) const override;
  bool lagrangian_hessian(const Eigen::VectorXd& z, const Eigen::VectorXd& w,
                          std::vector<Eigen::Triplet<double>>& trips) const override;

  /// Lower-triangle curvature of w.c(z) alone (no objective term); shared by
  /// the Lagrangian Hessian and the feasibility-restoration polish.
  void constraint_hessian(const Eigen::VectorXd& z, const Eigen::VectorXd& w,
                          std::vector<Eigen::Triplet<double>>& trips) const;

  // Decision-vector index map (state component i of node/interval k).
  int ix(int k, int i) const { return 4 * k + i; }
  int im(int k, int i) const { return 4 * nodes_ + 4 * k + i; }
  int iu(int k) const { return 4 * nodes_ + 4 * intervals_ + k; }
  int ium(int k) const { return 4 * nodes_ + 4 * intervals_ + nodes_ + k; }
  int itf() const { return num_vars() - 1; }
  int nodes() const { return nodes_; }
  int intervals() const { return intervals_; }
  const std::vector<double>& tau() const { return tau_; }

  /// Straight-line state guess toward a cured terminal state, constant dose.
  Eigen::VectorXd initial_guess() const;

  /// Pack a solution (typically from a coarser mesh, interpolated) into a
  /// decision vector for warm starts; unpack the reverse.
  Eigen::VectorXd pack(const OcSolution& sol) const;
  OcSolution unpack(const Eigen::VectorXd& z) const;

 private:
  OcProblem prob_;
  OcpConfig cfg_;
  std::vector<double> tau_;
  int nodes_ = 0;
  int intervals_ = 0;
};

/// Mesh-refined solve: collocate on a uniform mesh, then repeatedly split
/// intervals whose interpolant defect exceeds half the defect tolerance,
/// warm-starting each round, up to cfg.max_mesh_rounds extra rounds.
OcSolution solve_ocp(const OcProblem& prob, const OcpConfig& cfg);

/// Error-driven refinement: estimates each interval's interpolant-versus-
/// dynamics error at off-collocation samples and splits offending intervals
/// (error above half the defect tolerance) at their midpoints. Returns the
/// possibly enlarged normalized mesh; the mesh comes back unchanged when
/// every interval passes.
std::vector<double> refine_mesh(const OcProblem& prob, const OcpConfig& cfg,
                                const OcSolution& sol);

/// Turns a solved schedule into a replayable policy. With hold_days == 0 the
/// policy point-samples the quadratic dose profile at the query time. With
/// hold_days > 0 it returns the plan's mean dose over [t, t + hold_days), so a
/// simulator that holds each dose constant for hold_days administers exactly
/// the drug mass the plan calls for — point-sampling a rapidly switching
/// near-singular schedule at a coarser step aliases it badly. Either way the
/// dose is clamped to [0, u_max] and is 0 once the plan has ended.
std::unique_ptr<Policy> make_openloop_policy(const OcSolution& sol, double u_max,
                                             double hold_days = 0.0);

/// Integral of the piecewise-quadratic dose profile over [t0, t1] (days),
/// divided by (t1 - t0); time past the plan's end contributes zero dose.
/// Exact (per-piece Simpson), not a sampled approximation.
double average_dose(const OcSolution& sol, double t0, double t1);

/// Cubic-Hermite state / quadratic dose interpolants of one solution,
/// evaluated at absolute time t (days). Used for error estimation and tests.
StateVec interpolate_state(const OcSolution& sol, const PatientParams& params,
                           double t_days);
double interpolate_dose(const OcSolution& sol, double t_days);

/// Node-sampled view of the solution (t, x, u columns; cure time left unset).
Trajectory to_trajectory(const OcSolution& sol);

/// Exact-double JSON round-trip of the full solution.
std::string ocsolution_to_json(const OcSolution& sol);
OcSolution ocsolution_from_json(const std::string& text);

struct FeasibilityEntry {
  double r1 = 0.0;
  SolveStatus status = SolveStatus::iteration_limit;
  double tf = 0.0;
  double objective = 0.0;
  double max_defect = 0.0;
};

/// Re-solves the problem across tumor growth rates; each entry is warm-started
/// from the nominal solution when one is supplied.
std::vector<FeasibilityEntry> feasibility_scan(const OcProblem& prob,
                                               const OcpConfig& cfg,
                                               const std::vector<double>& r1_values,
                                               const OcSolution* nominal = nullptr);

}  // namespace chemo
