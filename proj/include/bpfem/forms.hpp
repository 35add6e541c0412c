#pragma once

/// \file forms.hpp
/// Assembly of the diffusion-reaction form a(.,.), the diagonal nodal
/// stabilisation s(.,.), the load functional with Dirichlet lifting, the
/// lumped L2 product and the semilinear reaction b(w; u, v).

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bpfem/coefficients.hpp"
#include "bpfem/projection.hpp"
#include "bpfem/quadrature.hpp"
#include "bpfem/space.hpp"

namespace bpfem {

/// Spatial dimension. The stabilisation weights scale with h^{d-2} and h^d.
inline constexpr int kDim = 2;

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Quadrature degree for the semilinear term and for error integrals.
inline int nonlinear_quadrature_degree(int k) { return std::max(4 * k, 8); }

/// Linear system over the interior dofs.
///
/// `A` and `M` are the stiffness-plus-reaction and mass matrices restricted
/// to interior dofs, `F` the load with the Dirichlet lifting moved to the
/// right-hand side, and `s_diag[i]` the weight of the nodal product at
/// interior dof i in s(v, w) = sum_i s_diag[i] v(x_i) w(x_i).
struct AssembledSystem {
  SpacePtr space;  // null for a purely algebraic system
  double alpha = 1.0;
  std::optional<double> exponent;
  SparseMatrix A;
  SparseMatrix M;
  Eigen::VectorXd s_diag;
  Eigen::VectorXd F;
  /// Full-dof vector holding g_D at boundary dofs and zero elsewhere.
  Eigen::VectorXd dirichlet;

  [[nodiscard]] Eigen::Index size() const { return A.rows(); }

  /// Builds a system without a mesh. The update norm uses M = I and every
  /// entry is an interior dof.
  static AssembledSystem from_matrices(SparseMatrix A, Eigen::VectorXd s_diag, Eigen::VectorXd F) {
    if (A.rows() != A.cols() || s_diag.size() != A.rows() || F.size() != A.rows()) {
      throw std::invalid_argument("inconsistent system dimensions");
    }
    AssembledSystem sys;
    sys.M.resize(A.rows(), A.cols());
    sys.M.setIdentity();
    sys.A = std::move(A);
    sys.s_diag = std::move(s_diag);
    sys.F = std::move(F);
    sys.dirichlet = Eigen::VectorXd::Zero(sys.A.rows());
    return sys;
  }

  /// Interior values of a field on this system's space.
  [[nodiscard]] Eigen::VectorXd restrict(const NodalField& v) const {
    if (!space) return v.values;
    if (v.space != space) throw std::invalid_argument("field does not live on the system's space");
    Eigen::VectorXd r(size());
    const auto& idx = space->interior_dofs();
    for (std::size_t i = 0; i < idx.size(); ++i) r[static_cast<Eigen::Index>(i)] = v[idx[i]];
    return r;
  }

  /// Full field from interior values, boundary dofs set to g_D.
  [[nodiscard]] NodalField expand(const Eigen::VectorXd& interior) const {
    if (!space) return NodalField(nullptr, interior);
    NodalField f(space, dirichlet);
    const auto& idx = space->interior_dofs();
    for (std::size_t i = 0; i < idx.size(); ++i) f[idx[i]] = interior[static_cast<Eigen::Index>(i)];
    return f;
  }

  /// Full field from interior values, boundary dofs set to zero.
  [[nodiscard]] NodalField expand_homogeneous(const Eigen::VectorXd& interior) const {
    if (!space) return NodalField(nullptr, interior);
    NodalField f = NodalField::zeros(space);
    const auto& idx = space->interior_dofs();
    for (std::size_t i = 0; i < idx.size(); ++i) f[idx[i]] = interior[static_cast<Eigen::Index>(i)];
    return f;
  }
};

namespace detail {

/// Per-cell sup norms of |D|_2 and |mu| used by the stabilisation weights.
inline std::pair<std::vector<double>, std::vector<double>> cell_sup_norms(const Mesh& mesh,
                                                                          const ProblemSpec& spec) {
  std::vector<double> dnorm(mesh.num_triangles(), 0.0), munorm(mesh.num_triangles(), 0.0);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    spec.diffusion.for_each_sample(mesh, t, [&](const Tensor2& d) { dnorm[t] = std::max(dnorm[t], d.spectral_norm()); });
    if (!spec.semilinear()) {
      spec.reaction.for_each_sample(mesh, t, [&](double mu) { munorm[t] = std::max(munorm[t], std::abs(mu)); });
    }
  }
  return {std::move(dnorm), std::move(munorm)};
}

}  // namespace detail

/// Stabilisation weight at a node with mesh-function value h:
/// alpha (|D| h^{d-2} + |mu| h^d).
inline double stabilisation_weight(double alpha, double d_norm, double mu_norm, double h) {
  return alpha * (d_norm * std::pow(h, kDim - 2) + mu_norm * std::pow(h, kDim));
}

/// Element stiffness-plus-reaction and mass matrices of cell t (local dof
/// order of the basis) and the element load vector.
struct CellMatrices {
  using Local = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 6, 6>;
  Local K;
  Local M;
  Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 6, 1> f;
};

inline CellMatrices cell_matrices(const FeSpace& space, const ProblemSpec& spec, std::size_t t,
                                  const QuadratureRule& mat_rule, const QuadratureRule& load_rule) {
  const std::size_t nloc = space.dofs_per_cell();
  const auto n = static_cast<Eigen::Index>(nloc);
  const LagrangeBasis& basis = space.basis();
  const bool with_reaction = !spec.semilinear();
  CellMatrices cm;
  cm.K.setZero(n, n);
  cm.M.setZero(n, n);
  cm.f.setZero(n);
  std::array<double, 6> phi{};
  std::array<std::array<double, 2>, 6> grad_ref{}, grad{};
  const CellGeometry geo = space.geometry(t);
  const double jdet = std::abs(geo.det);
  for (std::size_t q = 0; q < mat_rule.size(); ++q) {
    const auto [xi, eta] = mat_rule.points[q];
    const double w = mat_rule.weights[q] * jdet;
    const Point x = geo.map(xi, eta);
    basis.eval(xi, eta, phi.data());
    basis.eval_grad(xi, eta, grad_ref.data());
    for (std::size_t a = 0; a < nloc; ++a) grad[a] = geo.push_grad(grad_ref[a]);
    const Tensor2 d = spec.diffusion.at(t, x);
    const double mu = with_reaction ? spec.reaction.at(t, x) : 0.0;
    for (Eigen::Index b = 0; b < n; ++b) {
      const auto dg = d.apply(grad[b]);
      for (Eigen::Index a = 0; a < n; ++a) {
        const double mass = phi[a] * phi[b];
        cm.K(a, b) += w * (dg[0] * grad[a][0] + dg[1] * grad[a][1] + mu * mass);
        cm.M(a, b) += w * mass;
      }
    }
  }
  for (std::size_t q = 0; q < load_rule.size(); ++q) {
    const auto [xi, eta] = load_rule.points[q];
    const double w = load_rule.weights[q] * jdet;
    basis.eval(xi, eta, phi.data());
    const double f = spec.source.at(t, geo.map(xi, eta));
    for (Eigen::Index a = 0; a < n; ++a) cm.f[a] += w * f * phi[a];
  }
  return cm;
}

inline AssembledSystem assemble_system(const SpacePtr& space, const ProblemSpec& spec, double alpha) {
  if (!(alpha > 0.0)) throw ProblemError("stabilisation parameter alpha must be positive");
  const Mesh& mesh = space->mesh();
  spec.validate(mesh);
  const int k = space->degree();
  const std::size_t nloc = space->dofs_per_cell();
  const QuadratureRule mat_rule = triangle_rule(2 * k);
  const QuadratureRule load_rule = triangle_rule(2 * k + 2);

  AssembledSystem sys;
  sys.space = space;
  sys.alpha = alpha;
  sys.exponent = spec.exponent;
  const auto n = static_cast<Eigen::Index>(space->num_interior());
  sys.F = Eigen::VectorXd::Zero(n);
  sys.dirichlet = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space->num_dofs()));
  for (auto b : space->boundary_dofs()) {
    sys.dirichlet[static_cast<Eigen::Index>(b)] = spec.dirichlet(space->nodes()[b], space->marker(b));
  }

  std::vector<Eigen::Triplet<double>> a_trip, m_trip;
  a_trip.reserve(mesh.num_triangles() * nloc * nloc);
  m_trip.reserve(mesh.num_triangles() * nloc * nloc);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const CellMatrices cm = cell_matrices(*space, spec, t, mat_rule, load_rule);
    const std::size_t* dofs = space->cell_dofs(t);
    for (std::size_t a = 0; a < nloc; ++a) {
      const std::size_t ia = space->interior_index(dofs[a]);
      if (ia == kNoIndex) continue;
      const auto row = static_cast<Eigen::Index>(ia);
      const auto la = static_cast<Eigen::Index>(a);
      sys.F[row] += cm.f[la];
      for (std::size_t b = 0; b < nloc; ++b) {
        const std::size_t ib = space->interior_index(dofs[b]);
        const auto lb = static_cast<Eigen::Index>(b);
        if (ib == kNoIndex) {
          sys.F[row] -= cm.K(la, lb) * sys.dirichlet[static_cast<Eigen::Index>(dofs[b])];
        } else {
          a_trip.emplace_back(row, static_cast<Eigen::Index>(ib), cm.K(la, lb));
          m_trip.emplace_back(row, static_cast<Eigen::Index>(ib), cm.M(la, lb));
        }
      }
    }
  }
  sys.A.resize(n, n);
  sys.A.setFromTriplets(a_trip.begin(), a_trip.end());
  sys.M.resize(n, n);
  sys.M.setFromTriplets(m_trip.begin(), m_trip.end());

  const auto [dnorm, munorm] = detail::cell_sup_norms(mesh, spec);
  const NodalField h = mesh_function(space);
  sys.s_diag = Eigen::VectorXd::Zero(n);
  const auto& interior = space->interior_dofs();
  for (std::size_t i = 0; i < interior.size(); ++i) {
    double dmax = 0.0, mumax = 0.0;
    for (auto t : extended_patch(*space, interior[i])) {
      dmax = std::max(dmax, dnorm[t]);
      mumax = std::max(mumax, munorm[t]);
    }
    sys.s_diag[static_cast<Eigen::Index>(i)] = stabilisation_weight(alpha, dmax, mumax, h[interior[i]]);
  }
  return sys;
}

/// (v, w)_h = sum over interior nodes of h(x_i)^d v(x_i) w(x_i).
inline double lumped_product(const SpacePtr& space, const NodalField& v, const NodalField& w) {
  require_same_space(v, w);
  if (v.space != space) throw std::invalid_argument("fields do not live on the given space");
  const NodalField h = mesh_function(space);
  double s = 0.0;
  for (auto i : space->interior_dofs()) s += std::pow(h[i], kDim) * v[i] * w[i];
  return s;
}

/// s(v, w) for fields on the system's space (only interior nodes contribute).
inline double apply_stabilisation(const AssembledSystem& sys, const NodalField& v, const NodalField& w) {
  require_same_space(v, w);
  return (sys.s_diag.array() * sys.restrict(v).array() * sys.restrict(w).array()).sum();
}

/// Entry i of b(w; u, phi_i) = int |w|^{p-2} u phi_i over the patch of `dof`.
inline double semilinear_residual_at(const FeSpace& space, const NodalField& w, const NodalField& u, double p,
                                     std::size_t dof, const QuadratureRule& rule) {
  const LagrangeBasis& basis = space.basis();
  const std::size_t nloc = space.dofs_per_cell();
  std::array<double, 6> phi{};
  double s = 0.0;
  for (auto t : node_patch(space, dof)) {
    const std::size_t* dofs = space.cell_dofs(t);
    std::size_t local = nloc;
    for (std::size_t a = 0; a < nloc; ++a) {
      if (dofs[a] == dof) local = a;
    }
    const double jdet = std::abs(space.geometry(t).det);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      basis.eval(rule.points[q][0], rule.points[q][1], phi.data());
      double wq = 0.0, uq = 0.0;
      for (std::size_t a = 0; a < nloc; ++a) {
        wq += phi[a] * w[dofs[a]];
        uq += phi[a] * u[dofs[a]];
      }
      s += rule.weights[q] * jdet * std::pow(std::abs(wq), p - 2.0) * uq * phi[local];
    }
  }
  return s;
}

/// Vector over interior dofs of b(w; u, phi_i) = int |w|^{p-2} u phi_i.
inline Eigen::VectorXd semilinear_residual(const SpacePtr& space, const NodalField& w, const NodalField& u,
                                           double p) {
  require_same_space(w, u);
  if (!(p >= 2.0)) throw ProblemError("reaction exponent must be >= 2");
  const int k = space->degree();
  const QuadratureRule rule = triangle_rule(nonlinear_quadrature_degree(k));
  const LagrangeBasis& basis = space->basis();
  const std::size_t nloc = space->dofs_per_cell();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space->num_interior()));
  std::vector<std::array<double, 6>> phi(rule.size());
  for (std::size_t q = 0; q < rule.size(); ++q) basis.eval(rule.points[q][0], rule.points[q][1], phi[q].data());
  for (std::size_t t = 0; t < space->mesh().num_triangles(); ++t) {
    const std::size_t* dofs = space->cell_dofs(t);
    const double jdet = std::abs(space->geometry(t).det);
    std::array<double, 6> loc{};
    for (std::size_t q = 0; q < rule.size(); ++q) {
      double wq = 0.0, uq = 0.0;
      for (std::size_t a = 0; a < nloc; ++a) {
        wq += phi[q][a] * w[dofs[a]];
        uq += phi[q][a] * u[dofs[a]];
      }
      const double c = rule.weights[q] * jdet * std::pow(std::abs(wq), p - 2.0) * uq;
      for (std::size_t a = 0; a < nloc; ++a) loc[a] += c * phi[q][a];
    }
    for (std::size_t a = 0; a < nloc; ++a) {
      const std::size_t ia = space->interior_index(dofs[a]);
      if (ia != kNoIndex) r[static_cast<Eigen::Index>(ia)] += loc[a];
    }
  }
  return r;
}

/// The four scalar quantities of the monotonicity and Lipschitz bounds of
/// t -> |t|^{p-2} t:
///   monotone   = (|x|^{p-2}x - |y|^{p-2}y)(x - y)  >= C2 * monotone_weight
///   difference = ||x|^{p-2}x - |y|^{p-2}y|        <= C1 * difference_weight
struct PowerBounds {
  double monotone = 0.0;
  double monotone_weight = 0.0;
  double difference = 0.0;
  double difference_weight = 0.0;
};

inline PowerBounds scalar_power_bounds_check(double x, double y, double p) {
  if (!(p >= 2.0)) throw ProblemError("reaction exponent must be >= 2");
  auto power = [p](double t) { return std::pow(std::abs(t), p - 2.0) * t; };
  const double diff = power(x) - power(y);
  const double base = std::pow(std::abs(x) + std::abs(y), p - 2.0);
  return {diff * (x - y), base * (x - y) * (x - y), std::abs(diff), base * std::abs(x - y)};
}

}  // namespace bpfem
