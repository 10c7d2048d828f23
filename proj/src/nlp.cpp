#include "chemo/nlp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace chemo {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

using Eigen::VectorXd;

VectorXd project(const VectorXd& x, const VectorXd& lo, const VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

/// Augmented-Lagrangian value/gradient evaluator with reusable scratch.
class AlEval {
 public:
  AlEval(const NlpProblem& prob, const VectorXd& lambda, double mu)
      : prob_(prob), lambda_(lambda), mu_(mu) {}

  double value(const VectorXd& x) {
    const double f = prob_.objective(x, nullptr);
    prob_.constraints(x, c_);
    return f + lambda_.dot(c_) + 0.5 * mu_ * c_.squaredNorm();
  }

  /// Value and gradient together; also exposes the last c(x).
  double value_grad(const VectorXd& x, VectorXd& grad) {
    const double f = prob_.objective(x, &gf_);
    prob_.constraints(x, c_);
    trips_.clear();
    prob_.jacobian(x, trips_);
    w_ = lambda_ + mu_ * c_;
    grad = gf_;
    for (const auto& t : trips_) grad(t.col()) += t.value() * w_(t.row());
    return f + lambda_.dot(c_) + 0.5 * mu_ * c_.squaredNorm();
  }

  const VectorXd& last_c() const { return c_; }

 private:
  const NlpProblem& prob_;
  const VectorXd& lambda_;
  double mu_;
  VectorXd c_, gf_, w_;
  std::vector<Eigen::Triplet<double>> trips_;
};

struct LbfgsMemory {
  std::deque<VectorXd> s, y;
  std::deque<double> rho;
  int capacity;

  explicit LbfgsMemory(int cap) : capacity(std::max(1, cap)) {}

  void clear() {
    s.clear();
    y.clear();
    rho.clear();
  }

  void push(const VectorXd& si, const VectorXd& yi) {
    const double sy = si.dot(yi);
    if (sy <= 1e-12 * si.norm() * yi.norm()) return;  // curvature too weak
    s.push_back(si);
    y.push_back(yi);
    rho.push_back(1.0 / sy);
    if (static_cast<int>(s.size()) > capacity) {
      s.pop_front();
      y.pop_front();
      rho.pop_front();
    }
  }

  /// Two-loop recursion: returns H * g with the usual gamma scaling.
  VectorXd apply(const VectorXd& g) const {
    VectorXd q = g;
    const int k = static_cast<int>(s.size());
    std::vector<double> a(k);
    for (int i = k - 1; i >= 0; --i) {
      a[i] = rho[i] * s[i].dot(q);
      q -= a[i] * y[i];
    }
    if (k > 0) {
      const double gamma = s[k - 1].dot(y[k - 1]) / y[k - 1].squaredNorm();
      q *= gamma;
    }
    for (int i = 0; i < k; ++i) {
      const double b = rho[i] * y[i].dot(q);
      q += (a[i] - b) * s[i];
    }
    return q;
  }
};

double projected_gradient_norm(const VectorXd& x, const VectorXd& g,
                               const VectorXd& lo, const VectorXd& hi) {
  return (x - project(x - g, lo, hi)).cwiseAbs().maxCoeff();
}

/// Zeroes gradient components that point out of the box at active bounds.
VectorXd reduced_gradient(const VectorXd& x, const VectorXd& g,
                          const VectorXd& lo, const VectorXd& hi) {
  VectorXd gr = g;
  for (int i = 0; i < x.size(); ++i) {
    const double eps = 1e-10 * (1.0 + std::abs(x(i)));
    if (x(i) - lo(i) <= eps && g(i) > 0) gr(i) = 0;
    if (hi(i) - x(i) <= eps && g(i) < 0) gr(i) = 0;
  }
  return gr;
}

struct InnerResult {
  int iters = 0;
  bool converged = false;
};

/// Projected L-BFGS with Armijo backtracking along the projected arc.
InnerResult minimize_box(AlEval& eval, VectorXd& x, const VectorXd& lo,
                         const VectorXd& hi, double tol, int max_iter,
                         int memory) {
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 60;

  LbfgsMemory mem(memory);
  VectorXd g(x.size()), gn(x.size());
  double phi = eval.value_grad(x, g);
  InnerResult res;

  for (int it = 0; it < max_iter; ++it) {
    if (projected_gradient_norm(x, g, lo, hi) <= tol) {
      res.converged = true;
      res.iters = it;
      return res;
    }

    VectorXd gr = reduced_gradient(x, g, lo, hi);
    VectorXd d = -mem.apply(gr);
    for (int i = 0; i < x.size(); ++i)
      if (gr(i) == 0.0 && g(i) != 0.0) d(i) = 0.0;  // keep frozen vars frozen
    if (d.dot(g) > -1e-14 * d.norm() * g.norm()) {
      mem.clear();
      d = -gr;
    }

    auto backtrack = [&](const VectorXd& dir, double alpha0) -> bool {
      double alpha = alpha0;
      for (int bt = 0; bt < kMaxBacktracks; ++bt) {
        const VectorXd xn = project(x + alpha * dir, lo, hi);
        const VectorXd step = xn - x;
        const double decr = g.dot(step);
        if (step.cwiseAbs().maxCoeff() == 0.0) return false;  // box-blocked
        const double phin = eval.value(xn);
        if (phin <= phi + kArmijo * std::min(decr, 0.0)) {
          const double phi_new = eval.value_grad(xn, gn);
          mem.push(xn - x, gn - g);
          x = xn;
          g = gn;
          phi = phi_new;
          return true;
        }
        alpha *= 0.5;
      }
      return false;
    };

    const double alpha0 =
        mem.s.empty() ? std::min(1.0, 1.0 / std::max(1.0, d.cwiseAbs().maxCoeff()))
                      : 1.0;
    if (!backtrack(d, alpha0)) {
      mem.clear();
      if (!backtrack(-gr, std::min(1.0, 1.0 / std::max(1.0, gr.cwiseAbs().maxCoeff())))) {
        // No acceptable step along the steepest feasible direction: the
        // iterate is numerically stationary for this subproblem.
        res.iters = it + 1;
        res.converged = projected_gradient_norm(x, g, lo, hi) <= 10 * tol;
        return res;
      }
    }
    res.iters = it + 1;
  }
  return res;
}

/// Projected Newton on the augmented Lagrangian. Variables pinned or sitting
/// at an active bound with an outward gradient are frozen; the Newton system
/// of the free block — Hessian of f + w.c plus mu J^T J, with w = lambda +
/// mu c — is factorized sparsely with a Levenberg shift that grows until the
/// factorization is positive definite and the step descends; steps backtrack
/// along the projected arc. `sigma` persists across calls so consecutive
/// subproblems inherit the working shift.
InnerResult minimize_box_newton(const NlpProblem& prob, const VectorXd& lambda,
                                double mu, VectorXd& x, const VectorXd& lo,
                                const VectorXd& hi, double tol, int max_iter,
                                double& sigma) {
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 60;
  using SpMat = Eigen::SparseMatrix<double>;

  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(lambda.size());
  VectorXd c, cs, gf, gL(n), w;
  std::vector<Eigen::Triplet<double>> jt, ht, scratch;

  auto al_value = [&](const VectorXd& xx) {
    const double f = prob.objective(xx, nullptr);
    prob.constraints(xx, cs);
    return f + lambda.dot(cs) + 0.5 * mu * cs.squaredNorm();
  };

  // Value, gradient, constraints, and Jacobian triplets of the current x.
  auto eval_here = [&]() {
    const double f = prob.objective(x, &gf);
    prob.constraints(x, c);
    jt.clear();
    prob.jacobian(x, jt);
    w = lambda + mu * c;
    gL = gf;
    for (const auto& t : jt) gL(t.col()) += t.value() * w(t.row());
    return f + lambda.dot(c) + 0.5 * mu * c.squaredNorm();
  };

  double phi = eval_here();
  InnerResult res;

  for (int it = 0; it < max_iter; ++it) {
    if (projected_gradient_norm(x, gL, lo, hi) <= tol) {
      res.converged = true;
      res.iters = it;
      return res;
    }

    // Partition into frozen (pinned, or at a bound with outward gradient)
    // and free variables; fr maps full index -> free index or -1.
    std::vector<int> fr(n, -1);
    int nf = 0;
    for (int i = 0; i < n; ++i) {
      const double eps = 1e-10 * (1.0 + std::abs(x(i)));
      const bool at_lo = x(i) - lo(i) <= eps;
      const bool at_hi = hi(i) - x(i) <= eps;
      const bool frozen = (hi(i) - lo(i) <= eps) || (at_lo && gL(i) > 0) ||
                          (at_hi && gL(i) < 0);
      if (!frozen) fr[i] = nf++;
    }

    VectorXd d = VectorXd::Zero(n);
    bool have_newton = false;
    if (nf > 0) {
      ht.clear();
      if (!prob.lagrangian_hessian(x, w, ht))
        throw std::logic_error("nlp: curvature oracle vanished mid-solve");

      // Mirror the problem's lower triangle into a full symmetric matrix on
      // the free block, then add the Gauss-Newton penalty term mu J^T J.
      scratch.clear();
      scratch.reserve(2 * ht.size());
      for (const auto& t : ht) {
        if (t.row() < t.col())
          throw std::logic_error("nlp: hessian triplets must be lower-triangular");
        const int ri = fr[t.row()];
        const int ci = fr[t.col()];
        if (ri < 0 || ci < 0) continue;
        scratch.emplace_back(ri, ci, t.value());
        if (ri != ci) scratch.emplace_back(ci, ri, t.value());
      }
      SpMat H(nf, nf);
      H.setFromTriplets(scratch.begin(), scratch.end());
      if (m > 0) {
        scratch.clear();
        scratch.reserve(jt.size());
        for (const auto& t : jt) {
          const int ci = fr[t.col()];
          if (ci >= 0) scratch.emplace_back(t.row(), ci, t.value());
        }
        SpMat Jf(m, nf);
        Jf.setFromTriplets(scratch.begin(), scratch.end());
        const SpMat Jt = Jf.transpose();
        H += mu * (Jt * Jf);
      }

      VectorXd gfree(nf);
      for (int i = 0; i < n; ++i)
        if (fr[i] >= 0) gfree(fr[i]) = gL(i);

      SpMat I(nf, nf);
      I.setIdentity();
      Eigen::SimplicialLDLT<SpMat> ldlt;
      for (int attempt = 0; attempt < 40 && !have_newton; ++attempt) {
        const SpMat Hs = sigma > 0 ? SpMat(H + sigma * I) : H;
        ldlt.compute(Hs);
        if (ldlt.info() == Eigen::Success) {
          const VectorXd& D = ldlt.vectorD();
          if (D.minCoeff() > 1e-14 * std::max(1.0, D.maxCoeff())) {
            const VectorXd dfree = ldlt.solve(-gfree);
            if (dfree.allFinite() && gfree.dot(dfree) < 0) {
              for (int i = 0; i < n; ++i)
                if (fr[i] >= 0) d(i) = dfree(fr[i]);
              have_newton = true;
              break;
            }
          }
        }
        sigma = std::max(1e-8, sigma * 10.0);
      }
    }

    auto backtrack = [&](const VectorXd& dir, double alpha0, double* alpha_out) {
      double alpha = alpha0;
      for (int bt = 0; bt < kMaxBacktracks; ++bt) {
        const VectorXd xn = project(x + alpha * dir, lo, hi);
        const VectorXd step = xn - x;
        if (step.cwiseAbs().maxCoeff() == 0.0) return false;  // box-blocked
        const double decr = gL.dot(step);
        const double phin = al_value(xn);
        if (phin <= phi + kArmijo * std::min(decr, 0.0)) {
          x = xn;
          phi = eval_here();
          if (alpha_out) *alpha_out = alpha;
          return true;
        }
        alpha *= 0.5;
      }
      return false;
    };

    double alpha = 0.0;
    bool stepped = have_newton && backtrack(d, 1.0, &alpha);
    if (stepped) {
      // Shift adaptation: full steps relax it, heavily damped steps grow it.
      if (alpha == 1.0)
        sigma = sigma < 1e-12 ? 0.0 : sigma * 0.25;
      else if (alpha < 0.1)
        sigma = std::max(1e-8, sigma * 4.0);
    } else {
      const VectorXd gr = reduced_gradient(x, gL, lo, hi);
      const double a0 = std::min(1.0, 1.0 / std::max(1.0, gr.cwiseAbs().maxCoeff()));
      if (!backtrack(-gr, a0, nullptr)) {
        // Stationary to line-search resolution for this subproblem.
        res.iters = it + 1;
        res.converged = projected_gradient_norm(x, gL, lo, hi) <= 10 * tol;
        return res;
      }
      sigma = std::max(1e-8, sigma * 10.0);
    }
    res.iters = it + 1;
  }
  return res;
}

}  // namespace

SolveReport solve_augmented_lagrangian(const NlpProblem& prob, const VectorXd& x0,
                                       const SolverConfig& cfg) {
  const int n = prob.num_vars();
  const int m = prob.num_eq();
  if (x0.size() != n)
    throw std::invalid_argument("nlp: start point has wrong dimension");

  VectorXd lo(n), hi(n);
  prob.bounds(lo, hi);
  if (lo.size() != n || hi.size() != n)
    throw std::invalid_argument("nlp: bounds have wrong dimension");
  for (int i = 0; i < n; ++i)
    if (!(lo(i) <= hi(i)))
      throw std::invalid_argument("nlp: lower bound exceeds upper bound at index " +
                                  std::to_string(i));

  SolveReport rep;
  rep.x = project(x0, lo, hi);
  rep.lambda = VectorXd::Zero(m);

  double mu = cfg.mu_init;
  double omega = cfg.omega_init;
  double best_viol = std::numeric_limits<double>::infinity();
  double viol_prev = std::numeric_limits<double>::infinity();
  int stall = 0;

  // Inner-solver selection: problems with a curvature oracle get Newton.
  std::vector<Eigen::Triplet<double>> hprobe;
  const bool use_newton =
      prob.lagrangian_hessian(rep.x, VectorXd::Zero(m), hprobe);
  double sigma = 0.0;  // Levenberg shift, carried across subproblems

  VectorXd c(m), g(n);
  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    AlEval eval(prob, rep.lambda, mu);
    const InnerResult inner =
        use_newton
            ? minimize_box_newton(prob, rep.lambda, mu, rep.x, lo, hi, omega,
                                  cfg.max_inner, sigma)
            : minimize_box(eval, rep.x, lo, hi, omega, cfg.max_inner,
                           cfg.lbfgs_memory);
    rep.inner_iters += inner.iters;
    rep.outer_iters = outer + 1;

    prob.constraints(rep.x, c);
    const double viol = m > 0 ? c.cwiseAbs().maxCoeff() : 0.0;
    (void)eval.value_grad(rep.x, g);
    rep.kkt_residual = projected_gradient_norm(rep.x, g, lo, hi);
    rep.max_violation = viol;

    // Dual scaling: with large multipliers the attainable stationarity floor
    // grows proportionally, so the optimality test is scaled by the average
    // multiplier magnitude (in units of 100, the customary cutoff).
    const double dual_scale =
        m > 0 ? std::max(1.0, rep.lambda.lpNorm<1>() / (100.0 * m)) : 1.0;
    if (viol <= cfg.feas_tol && rep.kkt_residual <= cfg.opt_tol * dual_scale) {
      rep.status = SolveStatus::optimal;
      rep.objective = prob.objective(rep.x, nullptr);
      rep.message = "converged";
      return rep;
    }

    // Stall rule: no relative improvement of the violation for too long.
    if (viol < best_viol * (1.0 - cfg.stall_improvement)) {
      best_viol = viol;
      stall = 0;
    } else {
      ++stall;
    }
    if (m > 0 && viol > cfg.feas_tol && stall >= cfg.stall_outer_limit) {
      rep.status = SolveStatus::infeasible;
      rep.objective = prob.objective(rep.x, nullptr);
      rep.message = "constraint violation stalled at " + std::to_string(viol);
      return rep;
    }

    // Progress-gated first-order update: accept the iterate (update lambda,
    // tighten the subproblem) when the violation at least halved, otherwise
    // grow the penalty. Keeps mu as small as the problem allows, which keeps
    // the subproblems well-conditioned for the quasi-Newton inner solver.
    if (viol <= std::max(cfg.feas_tol, 0.5 * viol_prev)) {
      rep.lambda += mu * c;
      omega = std::max(omega * cfg.omega_shrink, cfg.omega_min);
    } else {
      mu = std::min(mu * cfg.mu_growth, cfg.mu_max);
    }
    viol_prev = viol;
  }

  rep.status = SolveStatus::iteration_limit;
  rep.objective = prob.objective(rep.x, nullptr);
  rep.message = "outer iteration limit reached";
  return rep;
}

}  // namespace chemo
