#pragma once

/// \file oracle.hpp
/// Reference solvers for the discrete obstacle problem
///
///   find u in K = {lower <= u <= upper}:  (A u + B(u) - F) . (v - u) >= 0  for all v in K,
///
/// by projected (nonlinear) Gauss-Seidel sweeps in ascending dof order.
/// Intended for test-sized systems.

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

#include "bpfem/forms.hpp"
#include "bpfem/solver.hpp"

namespace bpfem {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nodal contribution b_i(u) of a monotone reaction, evaluated with every
/// entry of `u` fixed (the caller varies u_i). Must be non-decreasing in u_i.
using NodalReaction = std::function<double(const Eigen::VectorXd& u, Eigen::Index i)>;

struct ViProblem {
  SparseMatrix A;  // SPD
  Eigen::VectorXd F;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  NodalReaction reaction;  // empty for the linear problem

  void validate() const {
    const Eigen::Index n = A.rows();
    if (A.cols() != n || F.size() != n || lower.size() != n || upper.size() != n) {
      throw std::invalid_argument("ViProblem dimensions are inconsistent");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(lower[i] <= upper[i])) throw std::invalid_argument("ViProblem box is empty at a dof");
    }
  }
};

/// VI built from an assembled linear system and a full-dof box.
inline ViProblem make_vi_problem(const AssembledSystem& sys, const BoundsBox& box) {
  const InteriorBox ib(sys, box);
  return {sys.A, sys.F, ib.lower, ib.upper, {}};
}

/// VI for the semilinear method: b_i(u) = int |w|^{p-2} w phi_i with w the
/// finite element function of u plus the Dirichlet values.
inline ViProblem make_nonlinear_vi_problem(const AssembledSystem& sys, const BoundsBox& box) {
  if (!sys.space || !sys.exponent) throw std::invalid_argument("semilinear system required");
  ViProblem vi = make_vi_problem(sys, box);
  const double p = *sys.exponent;
  auto rule = std::make_shared<const QuadratureRule>(triangle_rule(nonlinear_quadrature_degree(sys.space->degree())));
  auto work = std::make_shared<NodalField>(sys.expand(Eigen::VectorXd::Zero(sys.size())));
  vi.reaction = [&sys, p, rule, work](const Eigen::VectorXd& u, Eigen::Index i) {
    const auto& interior = sys.space->interior_dofs();
    // Refresh only the dofs that can influence the patch integral of dof i.
    const std::size_t dof = interior[static_cast<std::size_t>(i)];
    for (auto t : node_patch(*sys.space, dof)) {
      const std::size_t* d = sys.space->cell_dofs(t);
      for (std::size_t a = 0; a < sys.space->dofs_per_cell(); ++a) {
        const std::size_t ii = sys.space->interior_index(d[a]);
        if (ii != kNoIndex) (*work)[d[a]] = u[static_cast<Eigen::Index>(ii)];
      }
    }
    return semilinear_residual_at(*sys.space, *work, *work, p, dof, *rule);
  };
  return vi;
}

inline Eigen::VectorXd projected_gauss_seidel(const ViProblem& vi, double tol = 1e-12,
                                              std::size_t max_iter = 1000000) {
  vi.validate();
  if (vi.reaction) throw std::invalid_argument("problem has a nonlinear reaction; use the nonlinear oracle");
  const Eigen::SparseMatrix<double, Eigen::RowMajor> A = vi.A;
  const Eigen::Index n = A.rows();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n).cwiseMax(vi.lower).cwiseMin(vi.upper);
  for (std::size_t sweep = 0; sweep < max_iter; ++sweep) {
    double max_update = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double diag = 0.0, sigma = vi.F[i];
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A, i); it; ++it) {
        if (it.col() == i) {
          diag += it.value();
        } else {
          sigma -= it.value() * u[it.col()];
        }
      }
      if (!(diag > 0.0)) throw OracleError("non-positive diagonal entry");
      const double next = std::clamp(sigma / diag, vi.lower[i], vi.upper[i]);
      max_update = std::max(max_update, std::abs(next - u[i]));
      u[i] = next;
    }
    if (max_update <= tol) return u;
  }
  throw OracleError("projected Gauss-Seidel did not converge in " + std::to_string(max_iter) + " sweeps");
}

/// Root of the non-decreasing scalar map g on [lo, hi] clipped to the box:
/// returns lo if g(lo) >= 0, hi if g(hi) <= 0, otherwise bisects to `tol`.
/// Infinite ends are replaced by an expanding bracket around `start`.
inline double clipped_monotone_root(const std::function<double(double)>& g, double lo, double hi, double start,
                                    double tol = 1e-14) {
  if (std::isfinite(lo) && g(lo) >= 0.0) return lo;
  if (std::isfinite(hi) && g(hi) <= 0.0) return hi;
  double a = lo, b = hi;
  double step = std::max(1.0, std::abs(start));
  if (!std::isfinite(a)) {
    a = std::min(start, std::isfinite(b) ? b : start) - step;
    int guard = 0;
    while (g(a) > 0.0) {
      step *= 2.0;
      a -= step;
      if (++guard > 200) throw OracleError("bisection bracket failure (lower end)");
    }
  }
  step = std::max(1.0, std::abs(start));
  if (!std::isfinite(b)) {
    b = std::max(start, a) + step;
    int guard = 0;
    while (g(b) < 0.0) {
      step *= 2.0;
      b += step;
      if (++guard > 200) throw OracleError("bisection bracket failure (upper end)");
    }
  }
  if (g(a) > 0.0 || g(b) < 0.0) throw OracleError("bisection bracket failure: scalar map is not monotone");
  while (b - a > tol * std::max(1.0, std::abs(a))) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    (g(m) < 0.0 ? a : b) = m;
  }
  return 0.5 * (a + b);
}

/// Projected nonlinear Gauss-Seidel: each dof solves
/// A_ii u_i + b_i(u) = F_i - sum_{j != i} A_ij u_j for u_i (others frozen)
/// by safeguarded bisection, then is clipped to the box.
inline Eigen::VectorXd projected_nonlinear_gauss_seidel(const ViProblem& vi, double tol = 1e-12,
                                                        std::size_t max_iter = 100000) {
  vi.validate();
  if (!vi.reaction) throw std::invalid_argument("problem has no nonlinear reaction");
  const Eigen::SparseMatrix<double, Eigen::RowMajor> A = vi.A;
  const Eigen::Index n = A.rows();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n).cwiseMax(vi.lower).cwiseMin(vi.upper);
  for (std::size_t sweep = 0; sweep < max_iter; ++sweep) {
    double max_update = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double diag = 0.0, sigma = vi.F[i];
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A, i); it; ++it) {
        if (it.col() == i) {
          diag += it.value();
        } else {
          sigma -= it.value() * u[it.col()];
        }
      }
      if (!(diag > 0.0)) throw OracleError("non-positive diagonal entry");
      const double old = u[i];
      auto g = [&](double t) {
        u[i] = t;
        return diag * t + vi.reaction(u, i) - sigma;
      };
      const double next = clipped_monotone_root(g, vi.lower[i], vi.upper[i], old);
      u[i] = next;
      max_update = std::max(max_update, std::abs(next - old));
    }
    if (max_update <= tol) return u;
  }
  throw OracleError("projected nonlinear Gauss-Seidel did not converge in " + std::to_string(max_iter) +
                    " sweeps");
}

/// Discrete complementarity certificate of a VI solution. With
/// r = F - A u - B(u) and scale = tol * max(|F|_inf, 1):
/// interior values need |r_i| <= scale, values at the lower bound r_i <= scale,
/// values at the upper bound r_i >= -scale. Returns the worst violation
/// (<= 0 means the certificate holds).
inline double vi_certificate_violation(const ViProblem& vi, const Eigen::VectorXd& u, double tol) {
  Eigen::VectorXd r = vi.F - vi.A * u;
  if (vi.reaction) {
    for (Eigen::Index i = 0; i < u.size(); ++i) r[i] -= vi.reaction(u, i);
  }
  const double scale = tol * std::max(vi.F.lpNorm<Eigen::Infinity>(), 1.0);
  double worst = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    double v;
    if (u[i] == vi.lower[i] && u[i] == vi.upper[i]) {
      v = -scale;
    } else if (u[i] == vi.lower[i]) {
      v = r[i] - scale;
    } else if (u[i] == vi.upper[i]) {
      v = -r[i] - scale;
    } else {
      v = std::abs(r[i]) - scale;
    }
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace bpfem
