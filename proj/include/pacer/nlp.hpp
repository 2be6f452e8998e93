#pragma once

#include <cstdio>
#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pacer {

// Equality-constrained problem whose objective is a sum of squares:
//   min ||r(x)||^2   s.t.  c(x) = 0,  x_i >= b_i on selected coordinates.
// Jacobians are supplied as sparse triplets.
class ConstrainedLsqProblem {
 public:
  virtual ~ConstrainedLsqProblem() = default;

  virtual int num_vars() const = 0;
  virtual int num_constraints() const = 0;
  virtual int num_objective_residuals() const = 0;

  virtual void objective_residuals(const Eigen::VectorXd& x, Eigen::VectorXd& r,
                                   std::vector<Eigen::Triplet<double>>* jac) const = 0;
  virtual void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c,
                           std::vector<Eigen::Triplet<double>>* jac) const = 0;

  // (variable index, lower bound) pairs, handled by quadratic penalty.
  virtual const std::vector<std::pair<int, double>>& lower_bounds() const {
    static const std::vector<std::pair<int, double>> none;
    return none;
  }

  double objective_value(const Eigen::VectorXd& x) const {
    Eigen::VectorXd r(num_objective_residuals());
    objective_residuals(x, r, nullptr);
    return r.squaredNorm();
  }
};

struct AugLagOptions {
  double constraint_tol = 1e-9;  // on max |c|
  double kkt_tol = 1e-6;         // on the Lagrangian gradient inf-norm
  int max_outer = 60;
  int max_inner = 400;
  double mu0 = 1e2;
  double mu_max = 1e9;
  double mu_growth = 10.0;
  double bound_weight = 1e8;
  bool verbose = false;
};

struct AugLagResult {
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;  // constraint multiplier estimates
  double objective = 0.0;
  double kkt_residual = 0.0;
  double constraint_violation = 0.0;
  int outer_iters = 0;
  bool converged = false;
};

namespace detail {

// One Levenberg-Marquardt minimization of the augmented Lagrangian in
// least-squares form. Returns the gradient inf-norm reached.
inline double lm_minimize(const ConstrainedLsqProblem& prob, Eigen::VectorXd& x,
                          const Eigen::VectorXd& lambda, double mu, double bound_w,
                          int max_iter, double gtol) {
  const int n = prob.num_vars();
  const int m = prob.num_constraints();
  const int no = prob.num_objective_residuals();
  const auto& bounds = prob.lower_bounds();
  const int nb = static_cast<int>(bounds.size());
  const int total = no + m + nb;

  Eigen::VectorXd r(total);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(64 * static_cast<std::size_t>(m) + 4 * static_cast<std::size_t>(no) + nb);

  auto eval = [&](const Eigen::VectorXd& xv, Eigen::VectorXd& rv,
                  Eigen::SparseMatrix<double>* J) {
    trips.clear();
    Eigen::VectorXd ro(no), c(m);
    std::vector<Eigen::Triplet<double>> jo, jc;
    prob.objective_residuals(xv, ro, J ? &jo : nullptr);
    prob.constraints(xv, c, J ? &jc : nullptr);
    rv.head(no) = ro;
    double sc = std::sqrt(0.5 * mu);
    for (int i = 0; i < m; ++i) rv(no + i) = sc * (c(i) + lambda(i) / mu);
    double sb = std::sqrt(bound_w);
    for (int i = 0; i < nb; ++i) {
      double gap = bounds[i].second - xv(bounds[i].first);
      rv(no + m + i) = gap > 0.0 ? sb * gap : 0.0;
    }
    if (J) {
      for (const auto& t : jo) trips.emplace_back(t.row(), t.col(), t.value());
      for (const auto& t : jc) trips.emplace_back(no + t.row(), t.col(), sc * t.value());
      for (int i = 0; i < nb; ++i) {
        double gap = bounds[i].second - xv(bounds[i].first);
        if (gap > 0.0) trips.emplace_back(no + m + i, bounds[i].first, -sb);
      }
      J->resize(total, n);
      J->setFromTriplets(trips.begin(), trips.end());
    }
  };

  Eigen::SparseMatrix<double> J;
  eval(x, r, &J);
  double phi = r.squaredNorm();
  double nu = 1e-8;
  double gnorm = (2.0 * J.transpose() * r).lpNorm<Eigen::Infinity>();

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  Eigen::SparseMatrix<double> identity(n, n);
  identity.setIdentity();

  for (int iter = 0; iter < max_iter && gnorm > gtol; ++iter) {
    Eigen::VectorXd g = J.transpose() * r;
    Eigen::SparseMatrix<double> H = (J.transpose() * J).pruned();
    bool stepped = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      Eigen::SparseMatrix<double> A = H + nu * identity;
      solver.compute(A);
      if (solver.info() != Eigen::Success) {
        nu = std::max(nu * 10.0, 1e-12);
        continue;
      }
      Eigen::VectorXd step = solver.solve(-g);
      Eigen::VectorXd x_try = x + step;
      Eigen::VectorXd r_try(total);
      eval(x_try, r_try, nullptr);
      double phi_try = r_try.squaredNorm();
      if (phi_try < phi) {
        x = x_try;
        phi = phi_try;
        nu = std::max(nu * 0.25, 1e-12);
        stepped = true;
        break;
      }
      nu *= 10.0;
      if (nu > 1e14) break;
    }
    if (!stepped) break;
    eval(x, r, &J);
    gnorm = (2.0 * J.transpose() * r).lpNorm<Eigen::Infinity>();
  }
  return gnorm;
}

}  // namespace detail

// Augmented Lagrangian outer loop with first-order multiplier updates.
inline AugLagResult augmented_lagrangian_minimize(const ConstrainedLsqProblem& prob,
                                                  Eigen::VectorXd x0,
                                                  const AugLagOptions& opts = {}) {
  const int m = prob.num_constraints();
  AugLagResult res;
  res.x = std::move(x0);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  double mu = opts.mu0;

  Eigen::VectorXd c(m);
  prob.constraints(res.x, c, nullptr);
  double prev_viol = c.lpNorm<Eigen::Infinity>();

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    res.outer_iters = outer + 1;
    double gnorm = detail::lm_minimize(prob, res.x, lambda, mu, opts.bound_weight,
                                       opts.max_inner, opts.kkt_tol);
    prob.constraints(res.x, c, nullptr);
    double viol = c.lpNorm<Eigen::Infinity>();
    if (opts.verbose)
      std::fprintf(stderr, "  [al] outer %d: mu=%.1e viol=%.3e kkt=%.3e\n", outer, mu, viol,
                   gnorm);
    lambda += mu * c;
    res.kkt_residual = gnorm;
    res.constraint_violation = viol;
    res.multipliers = lambda;
    if (viol <= opts.constraint_tol && gnorm <= opts.kkt_tol) {
      res.converged = true;
      break;
    }
    if (viol > 0.25 * prev_viol) mu = std::min(mu * opts.mu_growth, opts.mu_max);
    prev_viol = viol;
  }
  res.objective = prob.objective_value(res.x);
  return res;
}

}  // namespace pacer
