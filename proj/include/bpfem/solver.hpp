#pragma once

/// \file solver.hpp
/// Galerkin solve and the damped Richardson iteration for the
/// bound-preserving method
///
///   A u^{n+1} = A u^n + omega (F - A (u^n)+ - B((u^n)+) - S (u^n)-),
///
/// where S is the diagonal stabilisation and B the semilinear reaction
/// (absent for linear problems). A is factorised once and reused.

#include <Eigen/Core>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "bpfem/forms.hpp"
#include "bpfem/projection.hpp"

namespace bpfem {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  double alpha = 1.0;
  double omega = 1.0;
  double tol = 1e-12;
  std::size_t max_iter = 10000;
  bool auto_damp = false;
  /// Consecutive non-decreasing updates that trigger halving of omega.
  std::size_t growth_window = 5;
  /// Iterations without a new smallest update norm that also trigger halving
  /// (catches limit cycles longer than two).
  std::size_t stall_window = 100;
  /// Optional hook called with (u, u+, u-) over interior dofs at every iterate.
  std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&)> observer;

  void validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    if (!(omega > 0.0 && omega <= 1.0)) throw std::invalid_argument("omega must lie in (0, 1]");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
    if (growth_window < 1 || stall_window < 1) throw std::invalid_argument("damping windows must be >= 1");
  }
};

struct SolveReport {
  NodalField u;
  NodalField u_plus;  // the numerical solution
  NodalField u_minus;
  std::size_t iterations = 0;        // of the final (possibly restarted) run
  std::size_t total_iterations = 0;  // across damping restarts
  std::vector<double> update_history;
  double omega_used = 1.0;
  bool converged = false;
};

/// Sparse LDL^T of an SPD matrix; rejects non-positive pivots.
class SpdFactorization {
 public:
  explicit SpdFactorization(const SparseMatrix& A) {
    ldlt_.compute(A);
    if (ldlt_.info() != Eigen::Success) throw SolverError("sparse LDL^T factorisation failed");
    const Eigen::VectorXd d = ldlt_.vectorD();
    if (d.size() > 0 && !(d.minCoeff() > 0.0)) {
      throw SolverError("matrix is not positive definite (non-positive LDL^T pivot)");
    }
  }
  [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = ldlt_.solve(b);
    if (ldlt_.info() != Eigen::Success) throw SolverError("sparse triangular solve failed");
    return x;
  }

 private:
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

/// Interior restriction of a full-dof box for a system.
struct InteriorBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  InteriorBox(const AssembledSystem& sys, const BoundsBox& box) {
    const Eigen::Index n = sys.size();
    const std::size_t ndof = sys.space ? sys.space->num_dofs() : static_cast<std::size_t>(n);
    box.validate(ndof);
    lower.resize(n);
    upper.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t dof = sys.space ? sys.space->interior_dofs()[static_cast<std::size_t>(i)]
                                        : static_cast<std::size_t>(i);
      lower[i] = box.lower.at(dof);
      upper[i] = box.upper.at(dof);
    }
  }

  void split(const Eigen::VectorXd& u, Eigen::VectorXd& plus, Eigen::VectorXd& minus) const {
    plus = u.cwiseMin(upper).cwiseMax(lower);
    minus = u - plus;
  }
};

/// NaN in, NaN out: a blown-up update must never look converged.
inline double mass_norm(const AssembledSystem& sys, const Eigen::VectorXd& v) {
  return std::sqrt(std::abs(v.dot(sys.M * v)));
}

inline NodalField galerkin_solve(const AssembledSystem& sys) {
  if (sys.size() == 0) return sys.expand(Eigen::VectorXd());
  const SpdFactorization fact(sys.A);
  return sys.expand(fact.solve(sys.F));
}

namespace detail {

/// r = F - A u+ - S u- (- B(u+)) on interior dofs.
using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& plus, const Eigen::VectorXd& minus)>;

inline SolveReport richardson_loop(const AssembledSystem& sys, const InteriorBox& box, const SolverConfig& cfg,
                                   const ResidualFn& residual) {
  cfg.validate();
  if (std::abs(cfg.alpha - sys.alpha) > 1e-14 * std::max(1.0, sys.alpha)) {
    throw std::invalid_argument("system was assembled with a different alpha than the solver config");
  }
  SolveReport rep;
  Eigen::VectorXd u0;
  std::unique_ptr<SpdFactorization> fact;
  if (sys.size() > 0) {
    fact = std::make_unique<SpdFactorization>(sys.A);
    u0 = fact->solve(sys.F);
  } else {
    u0.resize(0);
  }
  Eigen::VectorXd u = u0, plus, minus;
  double omega = cfg.omega;
  std::size_t growth = 0;
  std::size_t since_best = 0;
  double best = std::numeric_limits<double>::infinity();

  while (true) {
    if (sys.size() == 0) {
      rep.converged = true;
      rep.iterations = rep.total_iterations = 1;
      rep.update_history.push_back(0.0);
      break;
    }
    box.split(u, plus, minus);
    u = plus + minus;
    if (cfg.observer) cfg.observer(u, plus, minus);
    const Eigen::VectorXd delta = omega * fact->solve(residual(plus, minus));
    u += delta;
    const double norm = mass_norm(sys, delta);
    rep.update_history.push_back(norm);
    ++rep.iterations;
    ++rep.total_iterations;
    if (norm <= cfg.tol) {
      rep.converged = true;
      break;
    }
    const std::size_t hist = rep.update_history.size();
    const bool finite = std::isfinite(norm);
    // Non-decreasing counts as growth so that a 2-cycle (constant update norm)
    // also triggers damping.
    growth = (hist >= 2 && (!finite || norm >= rep.update_history[hist - 2])) ? growth + 1 : 0;
    if (norm < best) {
      best = norm;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (cfg.auto_damp && (!finite || growth >= cfg.growth_window || since_best >= cfg.stall_window)) {
      if (omega * 0.5 < cfg.omega * 1e-6) break;
      omega *= 0.5;
      u = u0;
      growth = 0;
      since_best = 0;
      best = std::numeric_limits<double>::infinity();
      rep.iterations = 0;
      rep.update_history.clear();
      if (rep.total_iterations >= cfg.max_iter) break;
      continue;
    }
    if (!finite || rep.total_iterations >= cfg.max_iter) break;
  }
  rep.omega_used = omega;
  box.split(u, plus, minus);
  // Rounding in u - plus could break u = u+ + u- by an ulp; define u from the parts.
  u = plus + minus;
  if (cfg.observer) cfg.observer(u, plus, minus);
  rep.u = sys.expand(u);
  rep.u_plus = sys.expand(plus);
  rep.u_minus = sys.expand_homogeneous(minus);
  return rep;
}

}  // namespace detail

/// Linear bound-preserving solve, started from the Galerkin solution.
/// Non-convergence is reported through `converged`, not by throwing.
inline SolveReport richardson_solve(const AssembledSystem& sys, const BoundsBox& box, const SolverConfig& cfg) {
  if (sys.exponent) throw std::invalid_argument("system is semilinear; use nonlinear_richardson_solve");
  const InteriorBox ibox(sys, box);
  return detail::richardson_loop(sys, ibox, cfg, [&](const Eigen::VectorXd& plus, const Eigen::VectorXd& minus) {
    Eigen::VectorXd r = sys.F - sys.A * plus;
    r.array() -= sys.s_diag.array() * minus.array();
    return r;
  });
}

/// B((u+)) over interior dofs for the full field with Dirichlet values.
inline Eigen::VectorXd semilinear_term(const AssembledSystem& sys, const Eigen::VectorXd& plus, double p) {
  const NodalField w = sys.expand(plus);
  return semilinear_residual(sys.space, w, w, p);
}

/// Semilinear bound-preserving solve. The preconditioner is the linear
/// diffusion operator A; the reaction enters the explicit residual.
inline SolveReport nonlinear_richardson_solve(const AssembledSystem& sys, const ProblemSpec& spec,
                                              const SolverConfig& cfg) {
  if (!spec.exponent || !(*spec.exponent >= 2.0)) throw ProblemError("reaction exponent p >= 2 required");
  if (!sys.exponent || *sys.exponent != *spec.exponent) {
    throw std::invalid_argument("system was not assembled for this semilinear problem");
  }
  if (!sys.space) throw std::invalid_argument("semilinear solve needs a finite element space");
  const double p = *spec.exponent;
  const InteriorBox ibox(sys, spec.bounds);
  return detail::richardson_loop(sys, ibox, cfg, [&](const Eigen::VectorXd& plus, const Eigen::VectorXd& minus) {
    Eigen::VectorXd r = sys.F - sys.A * plus - semilinear_term(sys, plus, p);
    r.array() -= sys.s_diag.array() * minus.array();
    return r;
  });
}

/// Residual of the discrete method at a computed solution,
/// F - A u+ - S u- (- B(u+)), over interior dofs.
inline Eigen::VectorXd method_residual(const AssembledSystem& sys, const SolveReport& rep) {
  const Eigen::VectorXd plus = sys.restrict(rep.u_plus);
  const Eigen::VectorXd minus = sys.restrict(rep.u_minus);
  Eigen::VectorXd r = sys.F - sys.A * plus;
  r.array() -= sys.s_diag.array() * minus.array();
  if (sys.exponent) r -= semilinear_term(sys, plus, *sys.exponent);
  return r;
}

/// sup_v r(v) / |v|_{L2} over interior-supported finite element v,
/// i.e. sqrt(r^T M^{-1} r).
inline double l2_dual_norm(const AssembledSystem& sys, const Eigen::VectorXd& r) {
  if (r.size() == 0) return 0.0;
  const SpdFactorization mass(sys.M);
  return std::sqrt(std::abs(r.dot(mass.solve(r))));
}

}  // namespace bpfem
